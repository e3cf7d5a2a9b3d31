#include "pacsr/sfi.hpp"

#include "pacsr/wavelet.hpp"

namespace pacsr {

namespace {

template <typename T>
void check_conv(const ConvLayer<T>& c, int cin, int cout, int k, const char* name) {
  if (!c.weight.defined() || c.weight.shape() != Shape{cout, cin, k, k})
    throw DimensionError(std::string("SFI ") + name + ": expected weights " +
                         shape_str({cout, cin, k, k}) + ", got " +
                         (c.weight.defined() ? shape_str(c.weight.shape()) : std::string("none")));
  if (c.bias.defined() && c.bias.value().size() != static_cast<std::size_t>(cout))
    throw DimensionError(std::string("SFI ") + name + ": bias size mismatch");
}

}  // namespace

template <typename T>
void SFIParams<T>::validate() const {
  const int c = channels();
  check_conv(conv1, c, c, 3, "conv1");
  check_conv(conv2, 4 * c, 4 * c, 1, "conv2");
  check_conv(conv3, c, c, 1, "conv3");
  check_conv(agg, 2 * c, c, 3, "agg");
}

namespace ag {

template <typename T>
Var<T> sfi(const Var<T>& f, const SFIParams<T>& p) {
  p.validate();
  if (f.shape().size() != 4 || f.dim(1) != p.channels())
    throw DimensionError("sfi: input " + shape_str(f.shape()) + " does not match " +
                         std::to_string(p.channels()) + " channels");
  const Var<T> e = dwt2(f);
  const Var<T> z = p.conv1(f);
  const Var<T> g = add(e, p.conv2(e));
  const Var<T> h = add(f, p.conv3(z));
  return p.agg(concat_channels(idwt2(g), h));
}

template Var<float> sfi<float>(const Var<float>&, const SFIParams<float>&);
template Var<double> sfi<double>(const Var<double>&, const SFIParams<double>&);

}  // namespace ag

template <typename T>
Tensor<T> sfi_forward(const Tensor<T>& f, const SFIParams<T>& p) {
  return unbatch(ag::sfi(as_batch(f), p));
}

template struct SFIParams<float>;
template struct SFIParams<double>;
template Tensor<float> sfi_forward<float>(const Tensor<float>&, const SFIParams<float>&);
template Tensor<double> sfi_forward<double>(const Tensor<double>&, const SFIParams<double>&);

}  // namespace pacsr

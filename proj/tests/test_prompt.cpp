#include <doctest.h>

#include <random>

#include "pacsr/errors.hpp"
#include "pacsr/prompt.hpp"

using namespace pacsr;

namespace {

int count_ones(const ShadowMask& m) {
  int n = 0;
  for (float v : m.values()) n += v == 1.0f;
  return n;
}

// Pixel-by-pixel distance to each segment.
ShadowMask brute_stroke(const std::vector<Point>& pts, int h, int w, double radius) {
  ShadowMask m({1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (std::size_t s = 0; s + 1 < std::max<std::size_t>(pts.size(), 2); ++s) {
        const Point a = pts[s], b = pts.size() > 1 ? pts[s + 1] : pts[s];
        const double vx = b.x - a.x, vy = b.y - a.y, len2 = vx * vx + vy * vy;
        // Clamped projection gives the round caps.
        double t = len2 > 0 ? ((x - a.x) * vx + (y - a.y) * vy) / len2 : 0.0;
        t = t < 0 ? 0 : (t > 1 ? 1 : t);
        if (std::hypot(a.x + t * vx - x, a.y + t * vy - y) <= radius) m.at(0, y, x) = 1.0f;
      }
  return m;
}

}  // namespace

TEST_SUITE("prompt_encoding") {

TEST_CASE("dot rasterizes to a radius-5 disk") {
  const auto m = rasterize(Prompt::dot({32, 32}), 64, 64);
  int expected = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const bool inside = (x - 32) * (x - 32) + (y - 32) * (y - 32) <= 25;
      expected += inside;
      CHECK(m.at(0, y, x) == (inside ? 1.0f : 0.0f));
    }
  CHECK(expected == 81);
  CHECK(count_ones(m) == 81);
}

TEST_CASE("dot at the border is clipped") {
  const auto m = rasterize(Prompt::dot({0, 0}), 16, 16);
  int expected = 0;
  for (int y = 0; y <= 5; ++y)
    for (int x = 0; x <= 5; ++x) expected += x * x + y * y <= 25;
  CHECK(count_ones(m) == expected);
}

TEST_CASE("horizontal line rasterizes to a 3 px stroke") {
  const std::vector<Point> pts{{10, 32}, {50, 32}};
  const auto m = rasterize(Prompt::line(pts), 64, 64);
  CHECK(m == brute_stroke(pts, 64, 64, 1.5));
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const bool body = y >= 31 && y <= 33 && x >= 10 && x <= 50;
      if (body) CHECK(m.at(0, y, x) == 1.0f);
      if (y < 31 || y > 33) CHECK(m.at(0, y, x) == 0.0f);
    }
}

TEST_CASE("random polylines match the brute-force stroke") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> cx(0, 47), cy(0, 39), nv(2, 5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Point> pts(nv(rng));
    for (auto& p : pts) p = {cx(rng), cy(rng)};
    const auto m = rasterize(Prompt::line(pts), 40, 48);
    CHECK(m == brute_stroke(pts, 40, 48, 1.5));
    CHECK(m == rasterize(Prompt::line(pts), 40, 48));

    // Support lies inside the vertex bounding box grown by the half width.
    int x0 = 99, x1 = -1, y0 = 99, y1 = -1;
    for (const auto& p : pts) {
      x0 = std::min(x0, p.x), x1 = std::max(x1, p.x), y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 48; ++x)
        if (m.at(0, y, x) != 0.0f) {
          CHECK(x >= x0 - 2);
          CHECK(x <= x1 + 2);
          CHECK(y >= y0 - 2);
          CHECK(y <= y1 + 2);
        }
  }
}

TEST_CASE("subject mask passes through") {
  std::mt19937_64 rng(22);
  ShadowMask mask({1, 20, 30});
  std::bernoulli_distribution b(0.3);
  for (auto& v : mask.values()) v = b(rng) ? 1.0f : 0.0f;
  mask[0] = 1.0f;
  CHECK(rasterize(Prompt::subject_mask(mask), 20, 30) == mask);
}

TEST_CASE("prompt validation errors") {
  CHECK_THROWS_AS(rasterize(Prompt::dot({64, 10}), 64, 64), ArgumentError);
  CHECK_THROWS_AS(rasterize(Prompt::dot({-1, 10}), 64, 64), ArgumentError);
  CHECK_THROWS_AS(rasterize(Prompt::dot({3, 64}), 64, 64), ArgumentError);
  CHECK_THROWS_AS(rasterize(Prompt::line({{1, 1}}), 64, 64), ArgumentError);
  CHECK_THROWS_AS(rasterize(Prompt::line({{1, 1}, {70, 2}}), 64, 64), ArgumentError);
  CHECK_THROWS_AS(rasterize(Prompt::subject_mask(ShadowMask({1, 8, 8})), 8, 8), ArgumentError);
  CHECK_THROWS_AS(rasterize(Prompt::subject_mask(ShadowMask({1, 8, 8}, 1.0f)), 8, 9), ArgumentError);
  CHECK_THROWS_AS(rasterize(Prompt::subject_mask(ShadowMask({1, 8, 8}, 0.5f)), 8, 8), ArgumentError);
  try {
    rasterize(Prompt::dot({70, 3}), 64, 64);
    FAIL("expected ArgumentError");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("(70, 3)") != std::string::npos);
  }
}

TEST_CASE("prompt kind names") {
  CHECK(parse_prompt_kind("dot") == PromptKind::dot);
  CHECK(parse_prompt_kind("line") == PromptKind::line);
  CHECK(parse_prompt_kind("mask") == PromptKind::subject_mask);
  CHECK(parse_prompt_kind("subject_mask") == PromptKind::subject_mask);
  CHECK(to_string(PromptKind::subject_mask) == "mask");
  CHECK_THROWS_AS(parse_prompt_kind("box"), ArgumentError);
}

TEST_CASE("encode_input concatenates image and prompt map") {
  std::mt19937_64 rng(23);
  Image x({3, 16, 24});
  std::uniform_real_distribution<float> u(0, 1);
  for (auto& v : x.values()) v = u(rng);
  const std::size_t plane = 16 * 24;

  const auto dot = Prompt::dot({5, 7});
  const auto e = encode_input(x, dot);
  CHECK(e.shape() == Shape{4, 16, 24});
  for (std::size_t i = 0; i < 3 * plane; ++i) CHECK(e[i] == x[i]);
  const auto r = rasterize(dot, 16, 24);
  for (std::size_t i = 0; i < plane; ++i) CHECK(e[3 * plane + i] == r[i]);

  const auto full = encode_input(x, Prompt::subject_mask(ShadowMask({1, 16, 24}, 1.0f)));
  for (std::size_t i = 0; i < plane; ++i) CHECK(full[3 * plane + i] == 1.0f);

  CHECK_THROWS_AS(encode_input(Image({1, 16, 24}), dot), ArgumentError);
  CHECK_THROWS_AS(encode_input(x, Prompt::subject_mask(ShadowMask({1, 16, 16}, 1.0f))), ArgumentError);
}

}  // TEST_SUITE

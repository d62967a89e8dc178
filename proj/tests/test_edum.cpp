#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "evalign/edum.hpp"
#include "test_support.hpp"

using namespace evalign;

namespace {

Tensor random_kernel(std::uint64_t seed, std::vector<std::size_t> shape) {
  Rng rng(seed);
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.data) v = rng.normal();
  return t;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("transposed conv: 1x1 input reproduces center-adjacent kernel entries") {
  FeatureMap in(1, 1, 1);
  in.at(0, 0, 0) = 3.0;
  const Tensor k = random_kernel(1, {1, 1, 3, 3});
  const FeatureMap out = transposed_conv2d(in, k, 2, 1, 1);
  REQUIRE(out.height == 2);
  REQUIRE(out.width == 2);
  CHECK(out.at(0, 0, 0) == 3.0 * k.data[4]);  // k[1][1]
  CHECK(out.at(0, 0, 1) == 3.0 * k.data[5]);  // k[1][2]
  CHECK(out.at(0, 1, 0) == 3.0 * k.data[7]);  // k[2][1]
  CHECK(out.at(0, 1, 1) == 3.0 * k.data[8]);  // k[2][2]
}

TEST_CASE("transposed conv: delta input stamps the kernel footprint") {
  FeatureMap in(1, 4, 4);
  in.at(0, 0, 0) = 1.0;
  const Tensor k = random_kernel(2, {1, 1, 3, 3});
  const FeatureMap out = transposed_conv2d(in, k, 1, 0, 0);
  REQUIRE(out.height == 6);
  for (int ky = 0; ky < 3; ++ky) {
    for (int kx = 0; kx < 3; ++kx) {
      CHECK(out.at(0, ky, kx) ==
            k.data[static_cast<std::size_t>(ky) * 3 + kx]);
    }
  }
  CHECK(out.at(0, 4, 4) == 0.0);
}

TEST_CASE("transposed conv matches the gather-form direct summation") {
  struct Config {
    int stride, pad, outpad;
  };
  const Config configs[] = {{1, 0, 0}, {1, 1, 0}, {2, 1, 1}, {2, 0, 1}, {3, 2, 2}};
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (const Config& c : configs) {
      const FeatureMap in = testsup::random_feature(seed, 3, 8, 8);
      const Tensor k = random_kernel(seed + 100, {3, 2, 3, 3});
      const FeatureMap got = transposed_conv2d(in, k, c.stride, c.pad, c.outpad);
      const FeatureMap want =
          testsup::tconv_gather_oracle(in, k, c.stride, c.pad, c.outpad);
      REQUIRE(got.data.size() == want.data.size());
      for (std::size_t i = 0; i < got.data.size(); ++i) {
        CHECK(std::abs(got.data[i] - want.data[i]) < 1e-10);
      }
    }
  }
}

TEST_CASE("conv and transposed conv are adjoint") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const int stride = 1 + static_cast<int>(rng.below(2));
    const int pad = static_cast<int>(rng.below(2));
    const int c1 = 2, c2 = 3, kh = 3;
    const FeatureMap x = testsup::random_feature(seed + 10, c1, 8, 8);
    const Tensor w_fwd = random_kernel(seed + 20, {static_cast<std::size_t>(c2),
                                                   static_cast<std::size_t>(c1),
                                                   3, 3});
    const FeatureMap cx = conv2d(x, w_fwd, {}, stride, pad);
    const FeatureMap y = testsup::random_feature(seed + 30, c2, cx.height,
                                                 cx.width);
    // same weights reinterpreted for the reverse direction
    Tensor w_rev = Tensor::zeros({static_cast<std::size_t>(c2),
                                  static_cast<std::size_t>(c1), 3, 3});
    w_rev.data = w_fwd.data;
    const int outpad_h = x.height - ((cx.height - 1) * stride - 2 * pad + kh);
    REQUIRE(outpad_h >= 0);
    const FeatureMap ty = transposed_conv2d(y, w_rev, stride, pad, outpad_h);
    REQUIRE(ty.height == x.height);
    CHECK(dot(cx.data, y.data) ==
          doctest::Approx(dot(x.data, ty.data)).epsilon(1e-8));
  }
}

TEST_CASE("edum output is exactly 2H x 2W") {
  const FeatureMap event_feat = testsup::random_feature(1, 4, 8, 8);
  const FeatureMap rgb_feat = testsup::random_feature(2, 4, 16, 16);
  const EdumParams params = EdumParams::random(4, 3);
  const FeatureMap out = edum_forward(event_feat, rgb_feat, params);
  CHECK(out.channels == 4);
  CHECK(out.height == 16);
  CHECK(out.width == 16);
}

TEST_CASE("identity modulation with suppressed attention is plain deconvolution") {
  const FeatureMap event_feat = testsup::random_feature(5, 4, 8, 8);
  const FeatureMap rgb_feat = testsup::random_feature(6, 4, 16, 16);
  const Tensor base = random_kernel(7, {4, 4, 3, 3});
  // attention branch biased far negative: sigmoid ~ 0
  const EdumParams params = EdumParams::identity(base, -40.0);
  const FeatureMap out = edum_forward(event_feat, rgb_feat, params);
  const FeatureMap plain = transposed_conv2d(event_feat, base, 2, 1, 1);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    CHECK(std::abs(out.data[i] - plain.data[i]) < 1e-6);
  }
}

TEST_CASE("saturated attention doubles the upsampled features") {
  const FeatureMap event_feat = testsup::random_feature(8, 4, 8, 8);
  const FeatureMap rgb_feat = testsup::random_feature(9, 4, 16, 16);
  const Tensor base = random_kernel(10, {4, 4, 3, 3});
  const EdumParams params = EdumParams::identity(base, 40.0);
  const FeatureMap out = edum_forward(event_feat, rgb_feat, params);
  const FeatureMap plain = transposed_conv2d(event_feat, base, 2, 1, 1);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    CHECK(out.data[i] == doctest::Approx(2.0 * plain.data[i]).epsilon(1e-9));
  }
}

TEST_CASE("global average pool is homogeneous of degree one") {
  FeatureMap f = testsup::random_feature(11, 3, 5, 7);
  const std::vector<double> base = global_average_pool(f);
  for (auto& v : f.data) v *= 2.5;
  const std::vector<double> scaled = global_average_pool(f);
  for (std::size_t c = 0; c < base.size(); ++c) {
    CHECK(scaled[c] == doctest::Approx(2.5 * base[c]).epsilon(1e-12));
  }
}

TEST_CASE("attention stays inside (0, 1): output between F' and 2F'") {
  const FeatureMap event_feat = testsup::random_feature(12, 3, 6, 6);
  const FeatureMap rgb_feat = testsup::random_feature(13, 3, 12, 12);
  const EdumParams params = EdumParams::random(3, 14);
  const FeatureMap out = edum_forward(event_feat, rgb_feat, params);
  Tensor scaled = params.kernel;
  const auto pooled = global_average_pool(event_feat);
  std::vector<double> mod(3);
  for (int i = 0; i < 3; ++i) {
    double s = params.mod_bias[static_cast<std::size_t>(i)];
    for (int j = 0; j < 3; ++j)
      s += params.mod_weight.data[static_cast<std::size_t>(i) * 3 + j] *
           pooled[static_cast<std::size_t>(j)];
    mod[static_cast<std::size_t>(i)] = s;
  }
  for (int ic = 0; ic < 3; ++ic)
    for (std::size_t k = 0; k < 3 * 9; ++k)
      scaled.data[static_cast<std::size_t>(ic) * 27 + k] *=
          mod[static_cast<std::size_t>(ic)];
  const FeatureMap up = transposed_conv2d(event_feat, scaled, 2, 1, 1);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double lo = std::min(up.data[i], 2.0 * up.data[i]);
    const double hi = std::max(up.data[i], 2.0 * up.data[i]);
    CHECK(out.data[i] >= lo - 1e-12);
    CHECK(out.data[i] <= hi + 1e-12);
  }
}

TEST_CASE("edum rejects mismatched guidance shapes") {
  const FeatureMap event_feat = testsup::random_feature(1, 4, 8, 8);
  const EdumParams params = EdumParams::random(4, 2);
  CHECK_THROWS_AS(
      edum_forward(event_feat, testsup::random_feature(2, 4, 15, 16), params),
      ShapeMismatch);
  CHECK_THROWS_AS(
      edum_forward(event_feat, testsup::random_feature(2, 3, 16, 16), params),
      ShapeMismatch);
}

TEST_CASE("edum parameters survive a tsr round trip") {
  namespace fs = std::filesystem;
  const EdumParams params = EdumParams::random(4, 99);
  const auto path = fs::temp_directory_path() / "evalign_test_edum.tsr";
  write_tsr(params.to_tensors(), path.string());
  const EdumParams back = EdumParams::from_tensors(read_tsr(path.string()));
  // f32 payload quantizes once; a second trip is exact
  const auto again = fs::temp_directory_path() / "evalign_test_edum2.tsr";
  write_tsr(back.to_tensors(), again.string());
  CHECK(testsup::slurp(path.string()) == testsup::slurp(again.string()));
  fs::remove(path);
  fs::remove(again);
}

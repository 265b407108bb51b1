#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "maskprobe/errors.hpp"
#include "maskprobe/image.hpp"
#include "maskprobe/image_ops.hpp"
#include "maskprobe/rng.hpp"
#include "test_util.hpp"

using namespace maskprobe;
using namespace testutil;

TEST_CASE("grid constructors enforce the minimum extent") {
  CHECK_THROWS_AS(Image(3, 8, 1), DimensionError);
  CHECK_THROWS_AS(DepthMap(8, 3), DimensionError);
  CHECK_THROWS_AS(Mask(2, 2), DimensionError);
  CHECK_THROWS_AS(Image(8, 8, 2), DimensionError);
  CHECK_NOTHROW(Image(4, 4, 1));
  CHECK_NOTHROW(Image(4, 4, 3));
}

TEST_CASE("grid validators enforce their value contracts") {
  DepthMap d(4, 4, 1.0);
  CHECK_NOTHROW(d.validate_ground_truth());
  d.at(1, 2) = 0.0;
  CHECK_THROWS_AS(d.validate_ground_truth(), DomainError);
  d.at(1, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(d.validate_finite(), DomainError);

  Mask m(4, 4, 0.5);
  CHECK_NOTHROW(m.validate());
  m.at(0, 0) = 1.25;
  CHECK_THROWS_AS(m.validate(), DomainError);
  m.at(0, 0) = 0.5;
  m.binary = true;
  CHECK_THROWS_AS(m.validate(), DomainError);
}

TEST_CASE("masking by all-ones returns the image bit for bit") {
  Rng rng(21);
  for (int c : {1, 3}) {
    const Image img = random_image(6, 9, c, rng);
    const Mask ones(6, 9, 1.0);
    const Image out = apply_mask(img, ones);
    CHECK(out.data == img.data);
    CHECK(out.channels == img.channels);
    CHECK(out.normalized == img.normalized);
  }
}

TEST_CASE("masking multiplies pointwise with one value per pixel") {
  Rng rng(22);
  const Image img = random_image(5, 4, 3, rng);
  const Mask m = random_mask(5, 4, rng);
  const Image out = apply_mask(img, m);
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 4; ++c)
        CHECK(out.at(r, c, ch) == img.at(r, c, ch) * m.at(r, c));
  CHECK_THROWS_AS(apply_mask(img, Mask(4, 4, 1.0)), DimensionError);
}

TEST_CASE("binarize emits exactly zeros and ones with ties kept") {
  Mask m(4, 4);
  m.data = {0.0,   0.01, 0.024999, 0.025, 0.2, 0.5, 1.0, 0.9,
            0.025, 0.0,  0.3,      0.026, 0.1, 0.0, 0.7, 0.024};
  const Mask b = binarize(m, 0.025);
  CHECK(b.binary);
  for (double v : b.data) CHECK((v == 0.0 || v == 1.0));
  CHECK(b.data[2] == 0.0);
  CHECK(b.data[3] == 1.0);  // threshold tie keeps the pixel
  CHECK(b.data[8] == 1.0);
  CHECK(b.data[15] == 0.0);
  CHECK_THROWS_AS(binarize(m, -0.1), ParameterError);
  CHECK_THROWS_AS(binarize(m, 1.5), ParameterError);
}

TEST_CASE("binarized sparseness is non-increasing in the threshold") {
  Rng rng(23);
  const Mask m = random_mask(12, 12, rng);
  double prev = 1.0;
  for (const double eps : {0.0, 0.1, 0.25, 0.5, 0.75, 1.0}) {
    const double s = sparseness(binarize(m, eps)).fraction_nonzero;
    CHECK(s <= prev);
    prev = s;
  }
}

TEST_CASE("sparseness counts the strictly positive fraction") {
  Mask m(4, 4, 0.0);
  m.at(0, 0) = 0.4;
  m.at(1, 1) = 1.0;
  m.at(2, 3) = 1e-12;
  const auto rep = sparseness(m);
  CHECK(rep.pixel_count == 16);
  CHECK(rep.fraction_nonzero == doctest::Approx(3.0 / 16.0).epsilon(1e-15));

  Rng rng(24);
  for (int i = 0; i < 10; ++i) {
    const Mask r = random_mask(8, 8, rng);
    const double full = sparseness(r).fraction_nonzero;
    CHECK(full >= 0.0);
    CHECK(full <= 1.0);
    const double bin = sparseness(binarize(r, 0.3)).fraction_nonzero;
    CHECK(bin <= full);
  }
}

TEST_CASE("z-score normalization round-trips through its inverse") {
  Rng rng(25);
  std::vector<Image> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(random_image(8, 8, 3, rng, 0.0, 1.0));
  const ChannelStats stats = compute_channel_stats(batch);
  CHECK(stats.mean.size() == 3);
  CHECK(stats.stddev.size() == 3);

  const Image norm = normalize_zscore(batch[0], stats);
  CHECK(norm.normalized);
  const Image back = denormalize_zscore(norm, stats);
  CHECK_FALSE(back.normalized);
  for (std::size_t i = 0; i < back.data.size(); ++i) {
    const double denom = std::max(std::fabs(batch[0].data[i]), 1e-9);
    CHECK(std::fabs(back.data[i] - batch[0].data[i]) / denom < 1e-6);
  }
}

TEST_CASE("channel statistics match a direct computation") {
  Image a(4, 4, 1, 2.0);
  Image b(4, 4, 1, 6.0);
  const ChannelStats stats = compute_channel_stats({a, b});
  CHECK(stats.mean[0] == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(stats.stddev[0] == doctest::Approx(2.0).epsilon(1e-15));

  ChannelStats bad = stats;
  bad.stddev[0] = 0.0;
  CHECK_THROWS_AS(normalize_zscore(a, bad), ParameterError);
  ChannelStats narrow;
  narrow.mean = {0.0};
  narrow.stddev = {1.0};
  Rng rng(26);
  CHECK_THROWS_AS(normalize_zscore(random_image(4, 4, 3, rng), narrow),
                  DimensionError);
}

TEST_CASE("edge map flags a vertical step and nothing on flat input") {
  Image flat(8, 8, 1, 0.5);
  const Mask none = edge_map(flat);
  for (double v : none.data) CHECK(v == 0.0);

  Image step(8, 8, 1, 0.0);
  for (int r = 0; r < 8; ++r)
    for (int c = 4; c < 8; ++c) step.at(r, c, 0) = 1.0;
  const Mask edges = edge_map(step);
  const double peak = *std::max_element(edges.data.begin(), edges.data.end());
  CHECK(peak == doctest::Approx(1.0).epsilon(1e-12));
  for (int r = 0; r < 8; ++r) {
    CHECK(edges.at(r, 3) > 0.5);
    CHECK(edges.at(r, 4) > 0.5);
    CHECK(edges.at(r, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(edges.at(r, 7) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("luminance uses the standard weights") {
  Image img(4, 4, 3);
  img.at(1, 1, 0) = 1.0;
  img.at(1, 1, 1) = 0.5;
  img.at(1, 1, 2) = 0.25;
  const auto lum = luminance(img);
  CHECK(lum[static_cast<std::size_t>(1) * 4 + 1] ==
        doctest::Approx(0.299 + 0.587 * 0.5 + 0.114 * 0.25).epsilon(1e-12));
  const Image gray = Image(4, 4, 1, 0.7);
  CHECK(luminance(gray) == gray.data);
}

TEST_CASE("mask total variation measures forward roughness") {
  Mask m(4, 4, 0.0);
  for (int r = 0; r < 4; ++r) m.at(r, 2) = 1.0;
  // Each row: |dx| transitions 0->1 and 1->0 contribute 2; columns flat.
  const double want = (4 * 2.0) / 16.0;
  CHECK(mask_total_variation(m) == doctest::Approx(want).epsilon(1e-12));
  CHECK(mask_total_variation(Mask(5, 5, 0.25)) == 0.0);
}

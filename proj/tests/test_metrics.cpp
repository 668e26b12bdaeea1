#include <doctest.h>

#include <cmath>
#include <random>

#include "relight/errors.hpp"
#include "relight/metrics.hpp"

using namespace relight;

namespace {

Image noise_image(int h, int w, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(h, w, 3);
  for (float& v : img.data) v = u(rng);
  return img;
}

Image disk_mask(int h, int w) {
  Image m(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dy = y - h / 2.0 + 0.5, dx = x - w / 2.0 + 0.5;
      m.at(y, x) = dx * dx + dy * dy < 0.16 * h * w ? 1.0f : 0.0f;
    }
  return m;
}

// Direct 2-D windowed SSIM over the full (unmasked) image, 'valid' windows.
double brute_force_ssim(const Image& a, const Image& b) {
  const int n = 11;
  double kernel[11][11], ksum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      kernel[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2.0 * 1.5 * 1.5));
      ksum += kernel[i][j];
    }
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    double sum = 0.0;
    int count = 0;
    for (int y = 0; y + n <= a.height; ++y)
      for (int x = 0; x + n <= a.width; ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            const double w = kernel[i][j] / ksum;
            const double va = a.at(y + i, x + j, c), vb = b.at(y + i, x + j, c);
            ma += w * va;
            mb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
        sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        ++count;
      }
    total += sum / count;
  }
  return total / a.channels;
}

}  // namespace

TEST_CASE("psnr from rmse") {
  CHECK(psnr_from_rmse(0.1) == 20.0);
  CHECK(psnr_from_rmse(0.0) == kPsnrCap);
  CHECK(psnr_from_rmse(1e-9) == kPsnrCap);
  CHECK(psnr_from_rmse(0.01) == doctest::Approx(40.0));
}

TEST_CASE("identical prediction") {
  const Image gt = noise_image(32, 32, 1);
  const auto m = masked_metrics(gt, gt, Image(32, 32, 1, 1.0f));
  CHECK(m.rmse == 0.0);
  CHECK(m.psnr == 100.0);
  CHECK(m.ssim == 1.0);
  CHECK(masked_ssim(gt, gt, disk_mask(32, 32)) == 1.0);
}

TEST_CASE("constant offset of 0.1 on a full mask") {
  Image gt(16, 16, 3, 0.25f), pred(16, 16, 3, 0.25f + 0.1f);
  const auto m = masked_metrics(pred, gt, Image(16, 16, 1, 1.0f));
  CHECK(m.rmse == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(m.psnr == doctest::Approx(20.0).epsilon(1e-6));
}

TEST_CASE("metrics ignore pixels outside the mask") {
  const Image gt = noise_image(40, 40, 2);
  Image pred = noise_image(40, 40, 3);
  const Image mask = disk_mask(40, 40);
  const auto before = masked_metrics(pred, gt, mask);
  Image pred2 = pred, gt2 = gt;
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x)
      if (mask.at(y, x) < 0.5f)
        for (int c = 0; c < 3; ++c) {
          pred2.at(y, x, c) = 1.0f - pred2.at(y, x, c);
          gt2.at(y, x, c) = 0.0f;
        }
  const auto after = masked_metrics(pred2, gt2, mask);
  CHECK(after.rmse == before.rmse);
  CHECK(after.psnr == before.psnr);
  CHECK(after.ssim == before.ssim);
}

TEST_CASE("ssim matches a direct windowed computation") {
  const Image a = noise_image(24, 20, 4);
  Image b = a;
  std::mt19937 rng(5);
  std::normal_distribution<float> n(0.0f, 0.1f);
  for (float& v : b.data) v = std::clamp(v + n(rng), 0.0f, 1.0f);
  const double fast = masked_ssim(a, b, Image(24, 20, 1, 1.0f));
  CHECK(fast == doctest::Approx(brute_force_ssim(a, b)).epsilon(1e-10));
  CHECK(fast < 1.0);
  CHECK(fast > -1.0);
}

TEST_CASE("error paths") {
  const Image a(8, 8, 3, 0.5f);
  CHECK_THROWS_AS(masked_metrics(a, a, Image(8, 8, 1, 0.0f)), EvaluationError);
  CHECK_THROWS_AS(masked_metrics(a, Image(8, 7, 3), Image(8, 8, 1, 1.0f)), ShapeError);
  CHECK_THROWS_AS(masked_metrics(a, a, Image(8, 8, 3, 1.0f)), ShapeError);
}

TEST_CASE("tiny masks fall back to a smaller window") {
  Image mask(16, 16, 1);
  for (int y = 4; y < 9; ++y)
    for (int x = 6; x < 12; ++x) mask.at(y, x) = 1.0f;
  const Image a = noise_image(16, 16, 6);
  CHECK(masked_ssim(a, a, mask) == 1.0);
  CHECK(masked_ssim(a, noise_image(16, 16, 7), mask) < 1.0);
}

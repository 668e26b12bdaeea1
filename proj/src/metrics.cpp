#include "relight/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "relight/errors.hpp"

namespace relight {
namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
constexpr double kSigma = 1.5;
constexpr int kWindow = 11;

void check_inputs(const Image& pred, const Image& gt, const Image& mask) {
  require_same_shape(pred, gt, "metrics");
  if (mask.channels != 1 || mask.height != pred.height || mask.width != pred.width) {
    throw ShapeError("metrics: mask must be H x W x 1 matching the images");
  }
}

struct Box {
  int y0, x0, y1, x1;  // inclusive-exclusive
};

Box mask_bounds(const Image& mask) {
  Box b{mask.height, mask.width, 0, 0};
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(y, x) > 0.5f) {
        b.y0 = std::min(b.y0, y);
        b.x0 = std::min(b.x0, x);
        b.y1 = std::max(b.y1, y + 1);
        b.x1 = std::max(b.x1, x + 1);
      }
  return b;
}

std::vector<double> gaussian_kernel(int size) {
  std::vector<double> k(size);
  double sum = 0.0;
  const int half = size / 2;
  for (int i = 0; i < size; ++i) {
    k[i] = std::exp(-0.5 * (i - half) * (i - half) / (kSigma * kSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable 'valid' filtering of a single-channel plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int oh = h - n + 1, ow = w - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * plane[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace

double psnr_from_rmse(double rmse) {
  if (rmse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -20.0 * std::log10(rmse));
}

double masked_rmse(const Image& pred, const Image& gt, const Image& mask) {
  check_inputs(pred, gt, mask);
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < pred.height; ++y)
    for (int x = 0; x < pred.width; ++x) {
      if (mask.at(y, x) <= 0.5f) continue;
      for (int c = 0; c < pred.channels; ++c) {
        const double d = double(pred.at(y, x, c)) - gt.at(y, x, c);
        sum += d * d;
      }
      count += pred.channels;
    }
  if (count == 0) throw EvaluationError("metrics: mask is empty");
  return std::sqrt(sum / count);
}

double masked_ssim(const Image& pred, const Image& gt, const Image& mask) {
  check_inputs(pred, gt, mask);
  const Box box = mask_bounds(mask);
  if (box.y1 <= box.y0) throw EvaluationError("metrics: mask is empty");
  const int h = box.y1 - box.y0, w = box.x1 - box.x0;
  int window = std::min({kWindow, h, w});
  if (window % 2 == 0) --window;
  const auto kernel = gaussian_kernel(window);

  double total = 0.0;
  for (int c = 0; c < pred.channels; ++c) {
    std::vector<double> a(static_cast<std::size_t>(h) * w), b(a.size());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const bool inside = mask.at(box.y0 + y, box.x0 + x) > 0.5f;
        a[static_cast<std::size_t>(y) * w + x] = inside ? pred.at(box.y0 + y, box.x0 + x, c) : 0.0;
        b[static_cast<std::size_t>(y) * w + x] = inside ? gt.at(box.y0 + y, box.x0 + x, c) : 0.0;
      }
    std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      aa[i] = a[i] * a[i];
      bb[i] = b[i] * b[i];
      ab[i] = a[i] * b[i];
    }
    const auto mu_a = filter_valid(a, h, w, kernel);
    const auto mu_b = filter_valid(b, h, w, kernel);
    const auto e_aa = filter_valid(aa, h, w, kernel);
    const auto e_bb = filter_valid(bb, h, w, kernel);
    const auto e_ab = filter_valid(ab, h, w, kernel);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
      const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      const double num = (2.0 * mu_a[i] * mu_b[i] + kC1) * (2.0 * cov + kC2);
      const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1) * (var_a + var_b + kC2);
      sum += num / den;
    }
    total += sum / static_cast<double>(mu_a.size());
  }
  return total / pred.channels;
}

MaskedMetrics masked_metrics(const Image& pred, const Image& gt, const Image& mask) {
  MaskedMetrics m;
  m.rmse = masked_rmse(pred, gt, mask);
  m.psnr = psnr_from_rmse(m.rmse);
  m.ssim = masked_ssim(pred, gt, mask);
  return m;
}

}  // namespace relight

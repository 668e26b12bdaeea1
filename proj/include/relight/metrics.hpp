#pragma once

#include "relight/image.hpp"

namespace relight {

inline constexpr double kPsnrCap = 100.0;

struct MaskedMetrics {
  double rmse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

// -20 log10(rmse) for data in [0, 1], capped at 100 dB.
double psnr_from_rmse(double rmse);

// RMSE over masked pixels and all channels.
double masked_rmse(const Image& pred, const Image& gt, const Image& mask);

// SSIM (11x11 Gaussian window, sigma 1.5, C1 = 0.01^2, C2 = 0.03^2) on the
// bounding box of the mask, with pixels outside the mask zeroed in both
// images. Windows are 'valid' positions; crops smaller than the window use
// the largest odd window that fits.
double masked_ssim(const Image& pred, const Image& gt, const Image& mask);

// Throws EvaluationError on an empty mask, ShapeError on mismatched shapes.
MaskedMetrics masked_metrics(const Image& pred, const Image& gt, const Image& mask);

}  // namespace relight

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vcloc/detect.hpp"
#include "vcloc/error.hpp"

namespace vcloc {

namespace {

// Stand-in for "infinitely bad" that keeps weighted sums finite.
constexpr double kWorstScore = 1e30;

// Summed-area table of squared intensities, (H+1) x (W+1).
Eigen::MatrixXd integral_sq(const Image& img) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(img.height() + 1, img.width() + 1);
  for (int y = 0; y < img.height(); ++y) {
    double row = 0.0;
    for (int x = 0; x < img.width(); ++x) {
      const double v = img(x, y);
      row += v * v;
      s(y + 1, x + 1) = s(y, x + 1) + row;
    }
  }
  return s;
}

}  // namespace

Eigen::MatrixXd nsqdiff_map(const Image& image, const Image& templ) {
  const int w = templ.width(), h = templ.height();
  if (w > image.width() || h > image.height() || templ.empty()) {
    throw Error(ErrorCode::TemplateLargerThanImage, "template does not fit inside the image");
  }
  const int nx = image.width() - w + 1, ny = image.height() - h + 1;
  double t2 = 0.0;
  for (float v : templ.data()) t2 += static_cast<double>(v) * v;
  const Eigen::MatrixXd sq = integral_sq(image);

  Eigen::MatrixXd score(ny, nx);
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      double cross = 0.0;
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          cross += static_cast<double>(templ(c, r)) * image(x + c, y + r);
        }
      }
      const double i2 = sq(y + h, x + w) - sq(y, x + w) - sq(y + h, x) + sq(y, x);
      const double num = std::max(0.0, t2 - 2.0 * cross + i2);
      const double den = std::sqrt(t2 * i2);
      if (den > 0.0) {
        score(y, x) = num / den;
      } else {
        score(y, x) = num <= 1e-12 ? 0.0 : kWorstScore;
      }
    }
  }
  return score;
}

std::vector<RoiProposal> template_match(const Image& image, const Image& templ, int pyramid_levels,
                                        int k_best) {
  if (templ.width() > image.width() || templ.height() > image.height() || templ.empty()) {
    throw Error(ErrorCode::TemplateLargerThanImage, "template does not fit inside the image");
  }
  pyramid_levels = std::max(1, pyramid_levels);
  k_best = std::max(1, k_best);

  // Build both pyramids; stop early if the template would vanish.
  std::vector<Image> imgs{image}, tpls{templ};
  for (int l = 1; l < pyramid_levels; ++l) {
    Image ni = downsample2(imgs.back()), nt = downsample2(tpls.back());
    if (nt.empty() || nt.width() > ni.width() || nt.height() > ni.height()) break;
    imgs.push_back(std::move(ni));
    tpls.push_back(std::move(nt));
  }
  const int levels = static_cast<int>(imgs.size());
  const double weight = 1.0 / levels;

  Eigen::MatrixXd combined = weight * nsqdiff_map(imgs[0], tpls[0]);
  for (int l = 1; l < levels; ++l) {
    const Eigen::MatrixXd m = nsqdiff_map(imgs[l], tpls[l]);
    for (int y = 0; y < combined.rows(); ++y) {
      for (int x = 0; x < combined.cols(); ++x) {
        const int yl = std::min<int>(y >> l, static_cast<int>(m.rows()) - 1);
        const int xl = std::min<int>(x >> l, static_cast<int>(m.cols()) - 1);
        combined(y, x) += weight * m(yl, xl);
      }
    }
  }

  // Row-major anchor order is the tie-break for equal scores.
  const auto cols = combined.cols();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(combined.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return combined(a / cols, a % cols) < combined(b / cols, b % cols);
  });

  const int radius = std::max(templ.width(), templ.height()) / 2;
  std::vector<RoiProposal> out;
  for (Eigen::Index idx : order) {
    const int x = static_cast<int>(idx % cols), y = static_cast<int>(idx / cols);
    const bool suppressed = std::any_of(out.begin(), out.end(), [&](const RoiProposal& r) {
      return std::abs(r.rect.x - x) <= radius && std::abs(r.rect.y - y) <= radius;
    });
    if (suppressed) continue;
    out.push_back({{x, y, templ.width(), templ.height()}, combined(y, x)});
    if (static_cast<int>(out.size()) == k_best) break;
  }
  return out;
}

}  // namespace vcloc

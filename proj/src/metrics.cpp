/*
 * Copyright (c) The ampe authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "ampe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ampe::metrics {
namespace {

Mat<double> gray(const Tensor<double>& t) {
  Mat<double> g = Mat<double>::Zero(t.height, t.width);
  for (Index c = 0; c < t.channels; ++c)
    g += Eigen::Map<const Mat<double>>(t.data.row(c).data(), t.height, t.width);
  return g / double(t.channels);
}

// Valid-mode separable correlation with a symmetric 1-D kernel.
Mat<double> filter_valid(const Mat<double>& f, const std::vector<double>& k) {
  const Index n = static_cast<Index>(k.size());
  const Index h = f.rows() - n + 1, w = f.cols() - n + 1;
  Mat<double> rows(f.rows(), w);
  for (Index y = 0; y < f.rows(); ++y)
    for (Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (Index d = 0; d < n; ++d) acc += k[static_cast<std::size_t>(d)] * f(y, x + d);
      rows(y, x) = acc;
    }
  Mat<double> out(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (Index d = 0; d < n; ++d) acc += k[static_cast<std::size_t>(d)] * rows(y + d, x);
      out(y, x) = acc;
    }
  return out;
}

std::vector<double> gaussian_1d() {
  std::vector<double> k(static_cast<std::size_t>(kSsimWindow));
  const Index r = kSsimWindow / 2;
  double sum = 0.0;
  for (Index d = -r; d <= r; ++d) {
    k[static_cast<std::size_t>(d + r)] = std::exp(-0.5 * double(d * d) / (kSsimSigma * kSsimSigma));
    sum += k[static_cast<std::size_t>(d + r)];
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

double psnr(const Tensor<double>& x, const Tensor<double>& y) {
  require_same_shape(x.shape(), y.shape(), "psnr");
  if (x.size() == 0) throw ShapeError("psnr: empty image");
  const double mse = (x.data - y.data).squaredNorm() / double(x.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

std::vector<double> ssim_window() {
  const auto k = gaussian_1d();
  std::vector<double> w;
  for (double a : k)
    for (double b : k) w.push_back(a * b);
  return w;
}

double ssim(const Tensor<double>& x, const Tensor<double>& y) {
  require_same_shape(x.shape(), y.shape(), "ssim");
  if (x.height < kSsimWindow || x.width < kSsimWindow) {
    throw ShapeError("ssim: image " + to_string(x.shape()) + " is smaller than the 11x11 window");
  }
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const auto k = gaussian_1d();
  const Mat<double> gx = gray(x), gy = gray(y);
  const Mat<double> mx = filter_valid(gx, k), my = filter_valid(gy, k);
  const Mat<double> sxx = filter_valid(gx.cwiseProduct(gx), k) - mx.cwiseProduct(mx);
  const Mat<double> syy = filter_valid(gy.cwiseProduct(gy), k) - my.cwiseProduct(my);
  const Mat<double> sxy = filter_valid(gx.cwiseProduct(gy), k) - mx.cwiseProduct(my);
  const auto num = (2.0 * mx.array() * my.array() + c1) * (2.0 * sxy.array() + c2);
  const auto den = (mx.array().square() + my.array().square() + c1) * (sxx.array() + syy.array() + c2);
  return (num / den).mean();
}

std::vector<AlphaSummary> MetricReport::summaries() const {
  std::vector<AlphaSummary> out;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const AlphaSummary& s) { return s.alpha == r.alpha; });
    if (it == out.end()) {
      out.push_back({r.alpha, 0.0, 0.0, 0});
      it = out.end() - 1;
    }
    it->mean_psnr += r.psnr;
    it->mean_ssim += r.ssim;
    ++it->count;
  }
  for (auto& s : out) {
    s.mean_psnr /= double(s.count);
    s.mean_ssim /= double(s.count);
  }
  return out;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json images = nlohmann::json::array();
  for (const auto& r : rows) images.push_back({{"id", r.id}, {"alpha", r.alpha}, {"psnr", r.psnr}, {"ssim", r.ssim}});
  nlohmann::json means = nlohmann::json::array();
  for (const auto& s : summaries())
    means.push_back({{"alpha", s.alpha}, {"psnr", s.mean_psnr}, {"ssim", s.mean_ssim}, {"count", s.count}});
  return {{"images", images}, {"means", means}};
}

std::string MetricReport::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "id,psnr,ssim,alpha\n";
  for (const auto& r : rows) out << r.id << ',' << r.psnr << ',' << r.ssim << ',' << r.alpha << '\n';
  return out.str();
}

}  // namespace ampe::metrics

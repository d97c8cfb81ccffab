#include "geom.hpp"

#include <algorithm>

namespace tomo {

double polyline_length(const std::vector<Vec3>& pts) {
  double len = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
  return len;
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  Vec3 ab = b - a;
  double len2 = ab.dot(ab);
  if (len2 == 0) return (p - a).norm();
  double t = std::max(0.0, std::min(1.0, (p - a).dot(ab) / len2));
  return (p - (a + ab * t)).norm();
}

double point_polyline_distance(const Vec3& p, const std::vector<Vec3>& pts) {
  if (pts.empty()) throw ArgError("point_polyline_distance: empty polyline");
  if (pts.size() == 1) return (p - pts[0]).norm();
  double best = (p - pts[0]).norm();
  for (std::size_t i = 1; i < pts.size(); ++i)
    best = std::min(best, point_segment_distance(p, pts[i - 1], pts[i]));
  return best;
}

std::vector<Vec3> resample_polyline(const std::vector<Vec3>& pts, double step) {
  if (pts.size() < 2 || step <= 0) return pts;
  std::vector<Vec3> out;
  out.push_back(pts[0]);
  double carried = 0;  // arc distance already consumed on the current segment
  for (std::size_t i = 1; i < pts.size(); ++i) {
    Vec3 a = pts[i - 1], b = pts[i];
    double seg = (b - a).norm();
    if (seg == 0) continue;
    double t = step - carried;
    while (t <= seg) {
      out.push_back(a + (b - a) * (t / seg));
      t += step;
    }
    carried = seg - (t - step);
  }
  if ((out.back() - pts.back()).norm() > 1e-9) out.push_back(pts.back());
  return out;
}

std::vector<Vec3> moving_average(const std::vector<Vec3>& pts, int window) {
  int n = int(pts.size());
  if (n < 3 || window < 3) return pts;
  int h = window / 2;
  std::vector<Vec3> out(pts.size());
  out[0] = pts[0];
  out[n - 1] = pts[n - 1];
  for (int i = 1; i < n - 1; ++i) {
    int r = std::min({h, i, n - 1 - i});
    Vec3 acc{0, 0, 0};
    for (int t = -r; t <= r; ++t) acc = acc + pts[i + t];
    out[i] = acc / double(2 * r + 1);
  }
  return out;
}

std::vector<Vec3> simplify_collinear(const std::vector<Vec3>& pts, double tol) {
  if (pts.size() < 3) return pts;
  std::vector<Vec3> out;
  out.push_back(pts[0]);
  std::size_t anchor = 0;
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    // Can the segment anchor -> i+1 absorb everything up to i?
    bool ok = true;
    for (std::size_t m = anchor + 1; m <= i; ++m)
      if (point_segment_distance(pts[m], pts[anchor], pts[i + 1]) >= tol) {
        ok = false;
        break;
      }
    if (!ok) {
      out.push_back(pts[i]);
      anchor = i;
    }
  }
  out.push_back(pts.back());
  return out;
}

std::vector<Vec3> smooth_centerline(const std::vector<Vec3>& pts, double resample_step, int window,
                                    double collinear_tol) {
  if (pts.size() < 2) return pts;
  auto r = resample_polyline(pts, resample_step);
  auto m = moving_average(r, window);
  return simplify_collinear(m, collinear_tol);
}

}  // namespace tomo

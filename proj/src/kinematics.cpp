#include "shmpose/kinematics.hpp"

#include <cmath>
#include <sstream>

namespace shmpose {

Point3 operator+(const Point3& a, const Point3& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}

Point3 operator-(const Point3& a, const Point3& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}

Point3 operator*(double s, const Point3& p) {
  return {s * p.x, s * p.y, s * p.z};
}

double norm(const Point3& p) {
  return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
}

double safe_asin(double value, double tolerance) {
  const double mag = std::abs(value);
  if (!(mag <= 1.0 + tolerance)) {
    std::ostringstream os;
    os << "asin argument " << value << " exceeds 1 by more than tolerance "
       << tolerance;
    throw DomainError(os.str());
  }
  if (value > 1.0) return std::asin(1.0);
  if (value < -1.0) return std::asin(-1.0);
  return std::asin(value);
}

ColumnSolution solve_column(const Point3& bottom_primed, double top_measured_x,
                            double top_measured_y,
                            const ColumnGeometry& geometry) {
  const double length = geometry.length;
  ColumnSolution s;
  s.delta_x = top_measured_x - bottom_primed.x;
  s.delta_y = top_measured_y - bottom_primed.y;

  s.r_y = safe_asin(s.delta_x / length);
  const double cos_ry = std::cos(s.r_y);
  if (std::abs(cos_ry) < 1e-9) {
    throw SingularityError("column horizontal in the x-z plane");
  }
  s.t_x = safe_asin(s.delta_y / (length * cos_ry));
  const double cos_tx = std::cos(s.t_x);

  s.top_primed = {top_measured_x, top_measured_y,
                  bottom_primed.z + length * cos_ry * cos_tx};
  s.dz_shortening = length - (s.top_primed.z - bottom_primed.z);
  return s;
}

Point3 forward_column(const Point3& bottom_primed,
                      const ColumnGeometry& geometry, double r_y, double t_x) {
  const double length = geometry.length;
  return {bottom_primed.x + length * std::sin(r_y),
          bottom_primed.y + length * std::cos(r_y) * std::sin(t_x),
          bottom_primed.z + length * std::cos(r_y) * std::cos(t_x)};
}

std::vector<ColumnSolution> solve_chain(
    const std::vector<ColumnGeometry>& chain,
    const std::vector<std::pair<double, double>>& measured_xy_per_node,
    const Point3& base_primed) {
  if (measured_xy_per_node.size() != chain.size()) {
    throw std::invalid_argument("one measured (x, y) pair per column required");
  }
  std::vector<ColumnSolution> solutions;
  solutions.reserve(chain.size());
  Point3 bottom = base_primed;
  for (size_t k = 0; k < chain.size(); ++k) {
    try {
      solutions.push_back(solve_column(bottom, measured_xy_per_node[k].first,
                                       measured_xy_per_node[k].second,
                                       chain[k]));
    } catch (const DomainError& e) {
      // Columns count from 1, chain base upward.
      throw DomainError("column " + std::to_string(k + 1) + ": " + e.what());
    } catch (const SingularityError& e) {
      throw SingularityError("column " + std::to_string(k + 1) + ": " +
                             e.what());
    }
    bottom = solutions.back().top_primed;
  }
  return solutions;
}

ColumnPose center_pose(const ColumnSolution& solution, double length,
                       const Point3& bottom_shift) {
  const double half = 0.5 * length;
  const double cos_ry = std::cos(solution.r_y);
  const double cos_tx = std::cos(solution.t_x);
  ColumnPose pose;
  pose.r_y = solution.r_y;
  pose.t_x = solution.t_x;
  pose.center_translation.x = half * std::sin(solution.r_y) + bottom_shift.x;
  pose.center_translation.y = half * std::sin(solution.t_x) + bottom_shift.y;
  // Signed downward: the rotation-induced drop of the center is emitted as
  // negative z so renderers can apply it directly.
  pose.center_translation.z =
      -half * ((1.0 - cos_tx) + (1.0 - cos_ry) * cos_tx) + bottom_shift.z;
  return pose;
}

}  // namespace shmpose

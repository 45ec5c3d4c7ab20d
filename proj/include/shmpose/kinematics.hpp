#pragma once

#include <stdexcept>
#include <string>
#include <vector>

// Rigid-column inverse movement solver: recovers per-column rotations and
// center translations from measured joint displacements, plus the forward
// parameterization used to verify it.

namespace shmpose {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;
};

Point3 operator+(const Point3& a, const Point3& b);
Point3 operator-(const Point3& a, const Point3& b);
Point3 operator*(double s, const Point3& p);
double norm(const Point3& p);

// A column segment between two joints; length is fixed (rigid body).
struct ColumnGeometry {
  double length = 0.0;  // meters
  Point3 rest_bottom;
  Point3 rest_top;
};

// Output of the per-column solve: rotation about y (r_y), rotation about x
// (t_x), the top joint's deformed position and the apparent z shortening.
struct ColumnSolution {
  double r_y = 0.0;  // radians
  double t_x = 0.0;  // radians
  Point3 top_primed;
  double dz_shortening = 0.0;  // meters, >= 0
  double delta_x = 0.0;        // top_primed.x - bottom_primed.x
  double delta_y = 0.0;        // top_primed.y - bottom_primed.y
};

// Render pose of a column: same angles, translation of the column center.
// center_translation.z is signed (negative when rotation shortens the
// column's apparent height).
struct ColumnPose {
  double r_y = 0.0;
  double t_x = 0.0;
  Point3 center_translation;
};

// Measured displacement implies a joint farther from its base than the rigid
// length allows.
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Column rotated to horizontal in the x-z plane; t_x is undefined there.
class SingularityError : public std::runtime_error {
 public:
  explicit SingularityError(const std::string& what)
      : std::runtime_error(what) {}
};

// Relative excess beyond |ratio| = 1 that is treated as measurement noise
// and clamped rather than rejected.
inline constexpr double kAsinNoiseTolerance = 1e-6;

// asin with a noise guard: clamps |value| <= 1 + tolerance into [-1, 1],
// throws DomainError beyond that.
double safe_asin(double value, double tolerance = kAsinNoiseTolerance);

// Inverse solve for one column. top_measured_x/y are the deformed (primed)
// coordinates of the top joint; z is recovered from the rigid-length
// constraint, never measured.
ColumnSolution solve_column(const Point3& bottom_primed, double top_measured_x,
                            double top_measured_y,
                            const ColumnGeometry& geometry);

// Forward parameterization: top = bottom + L*(sin r_y, cos r_y sin t_x,
// cos r_y cos t_x). Exact inverse of solve_column for |angles| < pi/2.
Point3 forward_column(const Point3& bottom_primed,
                      const ColumnGeometry& geometry, double r_y, double t_x);

// Solves a chain bottom-up; column k's bottom is column k-1's solved top.
// measured_xy_per_node carries one (x, y) pair per non-base joint, in chain
// order. Errors are annotated with the failing column index.
std::vector<ColumnSolution> solve_chain(
    const std::vector<ColumnGeometry>& chain,
    const std::vector<std::pair<double, double>>& measured_xy_per_node,
    const Point3& base_primed);

// Center translation for rendering (rotation happens at the column center,
// so the bottom must be moved back into place). bottom_shift is the bottom
// joint's deformed-minus-rest offset.
ColumnPose center_pose(const ColumnSolution& solution, double length,
                       const Point3& bottom_shift);

}  // namespace shmpose

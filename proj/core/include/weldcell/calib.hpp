#pragma once

#include <span>

#include "weldcell/geometry.hpp"

namespace weldcell::calib {

/// Flange frame in world coordinates.
struct FlangePose {
  Point3 position;
  Mat3 rotation;
};

struct TcpSolution {
  Vec3 offset;            // TCP in flange frame
  Point3 reference_point; // touched world point
  double residual;        // RMS of |R_i t + p_i - c|, mm
};

struct ToolFrame {
  Vec3 offset;
  Mat3 rotation;  // tool frame in flange frame
  double residual;
};

/// Least-squares TCP from >= 3 flange poses touching one fixed point:
/// minimizes sum |R_i t + p_i - c|^2 over (t, c) via the normal equations of
/// the stacked 3N x 6 system. Throws UnderdeterminedCalibration when the
/// smallest singular value of the system is <= 1e-6.
TcpSolution solve_tcp_offset(std::span<const FlangePose> samples);

/// Frame from the orient-origin, X-direction and Z-direction points:
/// x = dir(x_point), z = dir(z_point) orthogonalized against x, y = z cross x.
/// Throws DegenerateOrientation for coincident or collinear points.
Mat3 solve_tool_orientation(const Point3& orient_origin, const Point3& x_point,
                            const Point3& z_point);

/// Six-point tool frame: TCP from `touch_samples`, orientation from three
/// poses at a common flange rotation whose TCP positions mark the orient
/// origin, the X point and the Z point.
ToolFrame solve_tool_frame(std::span<const FlangePose> touch_samples,
                           const FlangePose& orient_origin, const FlangePose& x_point,
                           const FlangePose& z_point);

}  // namespace weldcell::calib

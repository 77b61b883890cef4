#include "weldcell/calib.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <fmt/core.h>

#include "weldcell/error.hpp"

namespace weldcell::calib {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

TcpSolution solve_tcp_offset(std::span<const FlangePose> samples) {
  if (samples.size() < 3) {
    throw Error(ErrorCode::UnderdeterminedCalibration,
                fmt::format("need at least 3 flange poses, got {}", samples.size()));
  }

  // Rows [R_i  -I] x = -p_i, accumulated straight into A^T A and A^T b.
  Mat6 ata = Mat6::Zero();
  Vec6 atb = Vec6::Zero();
  for (const auto& s : samples) {
    Eigen::Matrix<double, 3, 6> a;
    a << s.rotation, -Mat3::Identity();
    ata.noalias() += a.transpose() * a;
    atb.noalias() += a.transpose() * (-s.position);
  }

  // Singular values of A are the square roots of the eigenvalues of A^T A.
  Eigen::SelfAdjointEigenSolver<Mat6> eig(ata, Eigen::EigenvaluesOnly);
  const double sigma_min = std::sqrt(std::max(eig.eigenvalues()(0), 0.0));
  if (sigma_min <= 1e-6) {
    throw Error(ErrorCode::UnderdeterminedCalibration,
                fmt::format("flange rotations are not distinct enough (sigma_min={:g})", sigma_min));
  }

  const Vec6 x = ata.ldlt().solve(atb);
  TcpSolution sol;
  sol.offset = x.head<3>();
  sol.reference_point = x.tail<3>();

  double sq = 0.0;
  for (const auto& s : samples) {
    sq += (s.rotation * sol.offset + s.position - sol.reference_point).squaredNorm();
  }
  sol.residual = std::sqrt(sq / static_cast<double>(samples.size()));
  return sol;
}

Mat3 solve_tool_orientation(const Point3& orient_origin, const Point3& x_point,
                            const Point3& z_point) {
  const Vec3 dx = x_point - orient_origin;
  const Vec3 dz = z_point - orient_origin;
  if (dx.norm() < 1e-9 || dz.norm() < 1e-9) {
    throw Error(ErrorCode::DegenerateOrientation, "direction point coincides with orient origin");
  }
  const Vec3 x = dx.normalized();
  Vec3 z = dz - dz.dot(x) * x;
  if (z.norm() < 1e-9 * dz.norm()) {
    throw Error(ErrorCode::DegenerateOrientation, "orientation points are collinear");
  }
  z.normalize();
  const Vec3 y = z.cross(x);

  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

ToolFrame solve_tool_frame(std::span<const FlangePose> touch_samples,
                           const FlangePose& orient_origin, const FlangePose& x_point,
                           const FlangePose& z_point) {
  const TcpSolution tcp = solve_tcp_offset(touch_samples);
  auto tip = [&](const FlangePose& f) -> Point3 { return f.rotation * tcp.offset + f.position; };

  const Mat3 world = solve_tool_orientation(tip(orient_origin), tip(x_point), tip(z_point));
  ToolFrame frame;
  frame.offset = tcp.offset;
  frame.rotation = orient_origin.rotation.transpose() * world;
  frame.residual = tcp.residual;
  return frame;
}

}  // namespace weldcell::calib

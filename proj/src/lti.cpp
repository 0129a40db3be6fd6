#include "tdmpc/lti.hpp"

#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace tdmpc {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kCertificate: return "certificate error";
    case ErrorCode::kNumerical: return "numerical error";
    case ErrorCode::kOracle: return "oracle error";
    case ErrorCode::kIo: return "io error";
  }
  return "unknown error";
}

namespace {

std::string dims(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void check_plant_dims(const Matrix& a, const Matrix& b) {
  require(a.rows() >= 1 && a.rows() == a.cols(), ErrorCode::kInvalidArgument,
          "state matrix must be square and non-empty, got " + dims(a));
  require(b.rows() == a.rows() && b.cols() >= 1, ErrorCode::kInvalidArgument,
          "input matrix must have " + std::to_string(a.rows()) + " rows and at least one column, got " + dims(b));
  require(a.allFinite() && b.allFinite(), ErrorCode::kInvalidArgument, "plant matrices must be finite");
}

}  // namespace

LtiModel::LtiModel(Matrix a, Matrix b) : a_(std::move(a)), b_(std::move(b)) {
  check_plant_dims(a_, b_);
  stabilizable_ = is_stabilizable(a_, b_);
}

Matrix matrix_exponential(const Matrix& m) {
  require(m.rows() == m.cols(), ErrorCode::kInvalidArgument, "matrix exponential needs a square matrix");
  return m.exp();
}

LtiModel discretize_zoh(const Matrix& ac, const Matrix& bc, double ts) {
  check_plant_dims(ac, bc);
  require(ts > 0.0 && std::isfinite(ts), ErrorCode::kInvalidArgument, "sampling time must be positive");
  const Eigen::Index n = ac.rows();
  const Eigen::Index m = bc.cols();
  Matrix aug = Matrix::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = ac * ts;
  aug.topRightCorner(n, m) = bc * ts;
  const Matrix e = matrix_exponential(aug);
  return LtiModel(e.topLeftCorner(n, n), e.topRightCorner(n, m));
}

LtiModel discretize_euler(const Matrix& ac, const Matrix& bc, double ts) {
  check_plant_dims(ac, bc);
  require(ts > 0.0 && std::isfinite(ts), ErrorCode::kInvalidArgument, "sampling time must be positive");
  return LtiModel(Matrix::Identity(ac.rows(), ac.cols()) + ac * ts, bc * ts);
}

LtiModel discretize(const Matrix& ac, const Matrix& bc, double ts, Discretization method) {
  return method == Discretization::kZeroOrderHold ? discretize_zoh(ac, bc, ts) : discretize_euler(ac, bc, ts);
}

bool is_stabilizable(const Matrix& a, const Matrix& b, double tol) {
  using Complex = std::complex<double>;
  using ComplexMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = a.rows();
  Eigen::EigenSolver<Matrix> solver(a, false);
  if (solver.info() != Eigen::Success) return false;
  const double scale = std::max(1.0, std::max(a.norm(), b.norm()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Complex lambda = solver.eigenvalues()(i);
    if (std::abs(lambda) < 1.0 - tol) continue;
    ComplexMatrix pbh(n, n + b.cols());
    pbh.leftCols(n) = a.cast<Complex>() - lambda * ComplexMatrix::Identity(n, n);
    pbh.rightCols(b.cols()) = b.cast<Complex>();
    Eigen::JacobiSVD<ComplexMatrix> svd(pbh);
    if (svd.singularValues()(n - 1) <= tol * scale) return false;
  }
  return true;
}

double spectral_radius(const Matrix& m) {
  Eigen::EigenSolver<Matrix> solver(m, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_symmetric_positive_definite(const Matrix& m, double tol) {
  if (m.rows() == 0 || m.rows() != m.cols() || !m.allFinite()) return false;
  if ((m - m.transpose()).norm() > 1e-10 * std::max(1.0, m.norm())) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0) > tol * std::max(1.0, solver.eigenvalues().maxCoeff());
}

double dare_residual(const LtiModel& model, const Matrix& q, const Matrix& r, const Matrix& p, const Matrix& k) {
  const Matrix acl = model.A() - model.B() * k;
  const Matrix rhs = q + k.transpose() * r * k + acl.transpose() * p * acl;
  return (p - rhs).norm() / std::max(p.norm(), 1e-300);
}

CostSpec solve_dare(const LtiModel& model, const Matrix& q, const Matrix& r, const DareOptions& options) {
  require(q.rows() == model.n() && q.cols() == model.n(), ErrorCode::kInvalidArgument,
          "Q must be " + std::to_string(model.n()) + "x" + std::to_string(model.n()));
  require(r.rows() == model.m() && r.cols() == model.m(), ErrorCode::kInvalidArgument,
          "R must be " + std::to_string(model.m()) + "x" + std::to_string(model.m()));
  require(is_symmetric_positive_definite(q), ErrorCode::kInvalidArgument, "Q must be symmetric positive definite");
  require(is_symmetric_positive_definite(r), ErrorCode::kInvalidArgument, "R must be symmetric positive definite");
  require(model.stabilizable(), ErrorCode::kCertificate, "refusing DARE: (A, B) is not stabilizable");

  const Matrix& a = model.A();
  const Matrix& b = model.B();
  const Matrix at = a.transpose();
  Matrix p = q;
  int iterations = 0;
  for (; iterations < options.max_iterations; ++iterations) {
    const Matrix bp = b.transpose() * p;
    const Matrix s = r + bp * b;
    Matrix next = q + at * p * a - (bp * a).transpose() * s.ldlt().solve(bp * a);
    next = 0.5 * (next + next.transpose());
    const double change = (next - p).norm();
    p = std::move(next);
    if (!p.allFinite()) break;
    if (change <= options.relative_tolerance * p.norm()) {
      ++iterations;
      break;
    }
  }

  CostSpec cost;
  cost.Q = q;
  cost.R = r;
  cost.P = p;
  cost.dare_iterations = iterations;
  if (!p.allFinite()) {
    throw ResidualError(ErrorCode::kCertificate, "Riccati recursion diverged", INFINITY);
  }
  const Matrix bp = b.transpose() * p;
  cost.K = (r + bp * b).ldlt().solve(bp * a);
  cost.dare_residual = dare_residual(model, q, r, cost.P, cost.K);
  if (cost.dare_residual > options.residual_tolerance) {
    throw ResidualError(ErrorCode::kCertificate,
                        "Riccati recursion did not converge after " + std::to_string(iterations) + " iterations",
                        cost.dare_residual);
  }
  return cost;
}

}  // namespace tdmpc

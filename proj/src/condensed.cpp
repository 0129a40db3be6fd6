#include "tdmpc/condensed.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include "json.hpp"

namespace tdmpc {

namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kOrderTol = 1e-9;

Matrix symmetric_part(const Matrix& x) { return 0.5 * (x + x.transpose()); }

double min_eigenvalue(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric_part(s), Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

}  // namespace

CondensingBlocks build_condensing_blocks(const LtiModel& model, const CostSpec& cost, int horizon) {
  require(horizon >= 1, ErrorCode::kInvalidArgument, "horizon must be at least 1, got " + std::to_string(horizon));
  const int n = model.n();
  const int m = model.m();
  require(cost.Q.rows() == n && cost.Q.cols() == n && cost.P.rows() == n && cost.P.cols() == n &&
              cost.R.rows() == m && cost.R.cols() == m,
          ErrorCode::kInvalidArgument, "cost matrices do not match the plant dimensions");
  const int big_n = horizon;

  CondensingBlocks blocks;
  blocks.Ahat = Matrix::Zero((big_n + 1) * n, n);
  blocks.Bhat = Matrix::Zero((big_n + 1) * n, big_n * m);
  blocks.Hhat = Matrix::Zero((big_n + 1) * n, (big_n + 1) * n);

  // Powers A^0..A^N and the impulse blocks A^{i-1-j} B.
  std::vector<Matrix> powers(big_n + 1);
  powers[0] = Matrix::Identity(n, n);
  for (int i = 1; i <= big_n; ++i) powers[i] = model.A() * powers[i - 1];
  for (int i = 0; i <= big_n; ++i) {
    blocks.Ahat.block(i * n, 0, n, n) = powers[i];
    for (int j = 0; j < i; ++j) blocks.Bhat.block(i * n, j * m, n, m) = powers[i - 1 - j] * model.B();
    blocks.Hhat.block(i * n, i * n, n, n) = i < big_n ? cost.Q : cost.P;
  }
  return blocks;
}

double CondensedQp::cost(const Vector& x, const Vector& nu) const {
  return x.dot(W * x) + 2.0 * nu.dot(G * x) + nu.dot(H * nu);
}

CondensedQp build_condensed(const LtiModel& model, const CostSpec& cost, int horizon) {
  const CondensingBlocks blocks = build_condensing_blocks(model, cost, horizon);
  const int n = model.n();
  const int m = model.m();

  CondensedQp qp;
  qp.N = horizon;
  qp.n = n;
  qp.m = m;
  const Matrix hb = blocks.Hhat * blocks.Bhat;
  qp.H = blocks.Bhat.transpose() * hb;
  for (int i = 0; i < horizon; ++i) qp.H.block(i * m, i * m, m, m) += cost.R;
  qp.H = symmetric_part(qp.H);
  qp.G = hb.transpose() * blocks.Ahat;
  qp.W = symmetric_part(blocks.Ahat.transpose() * blocks.Hhat * blocks.Ahat);
  qp.Bbar = Matrix::Zero(n, horizon * m);
  qp.Bbar.leftCols(m) = model.B();

  qp.M.resize(n + horizon * m, n + horizon * m);
  qp.M.topLeftCorner(n, n) = qp.W;
  qp.M.topRightCorner(n, horizon * m) = qp.G.transpose();
  qp.M.bottomLeftCorner(horizon * m, n) = qp.G;
  qp.M.bottomRightCorner(horizon * m, horizon * m) = qp.H;

  require(min_eigenvalue(qp.H) > 0.0, ErrorCode::kNumerical, "condensed Hessian is not positive definite");
  const double scale = std::max(1.0, qp.W.norm());
  require(min_eigenvalue(qp.W - cost.Q) >= -kOrderTol * scale, ErrorCode::kCertificate, "W - Q is not PSD");
  require(min_eigenvalue(qp.W - cost.P) >= -kOrderTol * scale, ErrorCode::kCertificate,
          "W - P is not PSD; the terminal weight is not a DARE solution for this plant");
  return qp;
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

Matrix sym_inv_sqrt(const Matrix& mw) {
  require(mw.rows() == mw.cols() && mw.rows() > 0, ErrorCode::kInvalidArgument, "sym_inv_sqrt needs a square matrix");
  require((mw - mw.transpose()).norm() <= kSymmetryTol * std::max(1.0, mw.norm()), ErrorCode::kInvalidArgument,
          "sym_inv_sqrt needs a symmetric matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric_part(mw));
  const Vector& w = solver.eigenvalues();
  if (w(0) <= 0.0 || w(0) <= 1e-12 * w(w.size() - 1)) {
    fail(ErrorCode::kNumerical, "matrix is not positive definite or too ill-conditioned for an inverse square root");
  }
  const Matrix& v = solver.eigenvectors();
  return v * w.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
}

Matrix sym_sqrt(const Matrix& mw) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric_part(mw));
  const Vector w = solver.eigenvalues().cwiseMax(0.0);
  const Matrix& v = solver.eigenvectors();
  return v * w.cwiseSqrt().asDiagonal() * v.transpose();
}

EigBounds weighted_eig_bounds(const Matrix& mw, const Matrix& x) {
  require(x.rows() == mw.rows() && x.cols() == mw.cols(), ErrorCode::kInvalidArgument,
          "weighted eigenvalues need matrices of equal size");
  require(is_symmetric_positive_definite(mw), ErrorCode::kInvalidArgument, "weight matrix must be positive definite");
  EigBounds out;
  Matrix sx = x;
  if ((x - x.transpose()).norm() > kSymmetryTol * std::max(1.0, x.norm())) {
    sx = symmetric_part(x);
    out.symmetrized = true;
  }
  const Matrix whiten = sym_inv_sqrt(mw);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric_part(whiten * sx * whiten), Eigen::EigenvaluesOnly);
  out.lo = solver.eigenvalues()(0);
  out.hi = solver.eigenvalues()(solver.eigenvalues().size() - 1);
  return out;
}

SpectralData compute_spectral(const CondensedQp& qp) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(qp.H, Eigen::EigenvaluesOnly);
  SpectralData s;
  s.lamH_min = solver.eigenvalues()(0);
  s.lamH_max = solver.eigenvalues()(solver.eigenvalues().size() - 1);
  require(s.lamH_min > 0.0, ErrorCode::kNumerical, "condensed Hessian is not positive definite");
  s.alpha = 1.0 / (s.lamH_max + s.lamH_min);
  s.eta = (s.lamH_max - s.lamH_min) / (s.lamH_max + s.lamH_min);
  const Matrix h_is = sym_inv_sqrt(qp.H);
  s.L = spectral_norm(h_is) * spectral_norm(h_is * qp.G);
  return s;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json to_json(const CondensedQp& qp) {
  return {{"N", qp.N}, {"n", qp.n}, {"m", qp.m},
          {"H", matrix_to_json(qp.H)}, {"G", matrix_to_json(qp.G)}, {"W", matrix_to_json(qp.W)},
          {"Bbar", matrix_to_json(qp.Bbar)}};
}

}  // namespace tdmpc

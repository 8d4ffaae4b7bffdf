#ifndef UNISCATTER_OPERATORS_HPP
#define UNISCATTER_OPERATORS_HPP

#include <memory>
#include <variant>

#include "uniscatter/banded.hpp"
#include "uniscatter/common.hpp"

namespace uniscatter {

// Space tags.  H is one lattice of spinors, H0 = H (+) H the free space.
// Generic is used for test operators that live on no particular window.
enum class Space { H, H0, Generic };

std::string space_name(Space s);

class WindowedOperator;
using OpPtr = std::shared_ptr<const WindowedOperator>;

// Storage classes ------------------------------------------------------------

// Per-site 2x2 blocks (a coin operator).
struct BlockDiagStorage {
  std::vector<Mat2> blocks;  // one per site, flat layout pairs (2x, 2x+1)
};

// Scalar diagonal (position weights, cutoff functions).
struct DiagStorage {
  Vec d;
};

struct DenseStorage {
  Mat m;
};

// Direct sum acting on H0 = H (+) H: (x_l, x_r) -> (A x_l, B x_r).
struct DirectSumStorage {
  OpPtr left, right;
};

// Row pair [A  B] : H0 -> H, (x_l, x_r) -> A x_l + B x_r.
struct HPairStorage {
  OpPtr left, right;
};

// Column pair : H -> H0, x -> (A x, B x).
struct VPairStorage {
  OpPtr left, right;
};

// Finite Laurent polynomial sum_{p=-M..M} c_p base^p of a unitary base
// operator (used for smoothed spectral filters).
struct PolyStorage {
  OpPtr base;
  Vec coeff;  // size 2M+1, coeff[M + p] multiplies base^p
  Index order = 0;
};

using OperatorStorage = std::variant<BandedMatrix, BlockDiagStorage, DiagStorage, DenseStorage,
                                     DirectSumStorage, HPairStorage, VPairStorage, PolyStorage>;

// A bounded operator on the truncated window, stored by structure class with
// domain/codomain space tags.  Immutable after construction; safe to share
// across threads.
class WindowedOperator {
 public:
  WindowedOperator() = default;
  WindowedOperator(OperatorStorage s, Space dom, Space cod, Index dim_dom, Index dim_cod,
                   bool unitary = false)
      : storage_(std::move(s)),
        dom_(dom),
        cod_(cod),
        dim_dom_(dim_dom),
        dim_cod_(dim_cod),
        unitary_(unitary) {}

  const OperatorStorage& storage() const { return storage_; }
  Space domain() const { return dom_; }
  Space codomain() const { return cod_; }
  Index dim_domain() const { return dim_dom_; }
  Index dim_codomain() const { return dim_cod_; }
  bool unitary_tagged() const { return unitary_; }
  bool square() const { return dim_dom_ == dim_cod_ && dom_ == cod_; }

  const char* structure_name() const;

  // y = A x (or A^* x).  Checks the dimension of x against the domain
  // (codomain if adjoint); the tagged overload also checks the space.
  Vec apply(const Vec& x, bool adjoint = false) const;
  Vec apply(const Vec& x, Space x_space, bool adjoint) const;

 private:
  OperatorStorage storage_;
  Space dom_ = Space::Generic;
  Space cod_ = Space::Generic;
  Index dim_dom_ = 0;
  Index dim_cod_ = 0;
  bool unitary_ = false;
};

// Core operations ------------------------------------------------------------

SpinorState apply(const WindowedOperator& A, const SpinorState& v, bool adjoint = false);
DirectSumState apply(const WindowedOperator& A, const DirectSumState& v, bool adjoint = false);

struct SolveResult {
  Vec x;
  double residual = 0.0;  // ||A x - b|| / ||b||
};

// Reusable factorization (banded LU, dense LU, per-block or diagonal inverse;
// direct sums factor blockwise).  Build once, solve many right-hand sides,
// plain or adjoint.
class OperatorFactorization {
 public:
  explicit OperatorFactorization(const WindowedOperator& A, double rel_pivot_tol = 1e-14);
  Vec solve(const Vec& b, bool adjoint = false) const;
  const WindowedOperator& op() const { return *op_; }

 private:
  struct DiagInv {
    Vec d;
  };
  struct BlockInv {
    std::vector<Mat2> inv;
  };
  std::shared_ptr<const WindowedOperator> op_keepalive_;
  const WindowedOperator* op_ = nullptr;
  std::variant<std::monostate, BandedLU, Eigen::PartialPivLU<Mat>, DiagInv, BlockInv,
               std::pair<std::shared_ptr<OperatorFactorization>, std::shared_ptr<OperatorFactorization>>>
      fact_;
};

// One-shot solve with residual report.
SolveResult solve(const WindowedOperator& A, const Vec& b, bool adjoint = false);
SolveResult solve(const WindowedOperator& A, const SpinorState& b, bool adjoint = false);

// Spectral norm by power iteration on A^* A with a deterministic seed vector.
struct PowerIterOptions {
  double rel_tol = 1e-10;
  int max_iters = 20000;
  std::uint64_t seed = 0x5eedULL;
};
double op_norm(const WindowedOperator& A, const PowerIterOptions& opts = {});

// Frobenius norm.
double hs_norm(const WindowedOperator& A);

Mat to_dense(const WindowedOperator& A);

WindowedOperator adjoint_of(const WindowedOperator& A);

// Builders -------------------------------------------------------------------

WindowedOperator make_identity(Space s, Index dim);
WindowedOperator make_scaled_identity(Space s, Index dim, cplx c);
WindowedOperator make_diag(Space s, Vec d);
WindowedOperator make_dense(Space s, Mat m, bool unitary = false);
WindowedOperator make_dense(Space dom, Space cod, Mat m);
WindowedOperator make_banded(Space s, BandedMatrix b, bool unitary = false);
WindowedOperator make_block_diag(Space s, std::vector<Mat2> blocks, bool unitary = false);
WindowedOperator make_direct_sum(WindowedOperator left, WindowedOperator right);
WindowedOperator make_hpair(WindowedOperator left, WindowedOperator right);
WindowedOperator make_vpair(WindowedOperator left, WindowedOperator right);
WindowedOperator make_poly(WindowedOperator base, Vec coeff, Index order);

// Deterministic pseudo-random vectors/matrices for seeds and tests.
Vec deterministic_vector(Index n, std::uint64_t seed);
Mat random_unitary(Index n, std::uint64_t seed);

}  // namespace uniscatter

#endif

#pragma once

#include <complex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

// Operators on composite Hilbert spaces (cavity ⊗ qudits), exact Hermitian
// diagonalization, and the vectorized Lindblad superoperator.
//
// Convention used throughout: subsystem 0 is the cavity, qubits follow in
// chip order. Basis index is mixed-radix with subsystem 0 most significant,
// i.e. index = ((n_cav * d_1 + l_1) * d_2 + l_2) * ...

namespace tcs {

using Complex = std::complex<double>;
using DenseMatrix = Eigen::MatrixXcd;
using SparseCMatrix = Eigen::SparseMatrix<Complex>;

/// Immutable description of a tensor-product space.
class HilbertLayout {
public:
    /// Single two-level placeholder; reassign before use.
    HilbertLayout() : HilbertLayout(std::vector<int>{2}) {}
    explicit HilbertLayout(std::vector<int> subsystem_dims);
    HilbertLayout(std::initializer_list<int> subsystem_dims)
        : HilbertLayout(std::vector<int>(subsystem_dims)) {}

    int subsystem_count() const { return static_cast<int>(dims_.size()); }
    int dim(int subsystem) const;
    int total_dim() const { return total_dim_; }
    const std::vector<int>& dims() const { return dims_; }

    /// Mixed-radix state index from per-subsystem levels.
    int state_index(std::span<const int> levels) const;
    /// Inverse of state_index.
    std::vector<int> levels_of(int index) const;

    bool operator==(const HilbertLayout& other) const { return dims_ == other.dims_; }
    bool operator!=(const HilbertLayout& other) const { return !(*this == other); }

private:
    std::vector<int> dims_;
    int total_dim_ = 0;
};

/// Complex operator tied to a HilbertLayout. Stored sparse internally; most
/// operators here are tensor products of small local terms. dense() is used
/// where a solver needs contiguous storage.
class OperatorMatrix {
public:
    OperatorMatrix() : OperatorMatrix(HilbertLayout(), SparseCMatrix(2, 2)) {}
    OperatorMatrix(HilbertLayout layout, SparseCMatrix entries);
    OperatorMatrix(HilbertLayout layout, const DenseMatrix& entries);

    const HilbertLayout& layout() const { return layout_; }
    int dim() const { return layout_.total_dim(); }
    const SparseCMatrix& sparse() const { return entries_; }
    DenseMatrix dense() const { return DenseMatrix(entries_); }

    /// Max-norm Hermiticity test, relative to the largest entry.
    bool is_hermitian(double rel_tol = 1e-12) const;

    OperatorMatrix adjoint() const;
    double max_abs() const;

    OperatorMatrix& operator+=(const OperatorMatrix& rhs);
    OperatorMatrix& operator-=(const OperatorMatrix& rhs);
    OperatorMatrix& operator*=(Complex scale);

    friend OperatorMatrix operator+(OperatorMatrix lhs, const OperatorMatrix& rhs) {
        lhs += rhs;
        return lhs;
    }
    friend OperatorMatrix operator-(OperatorMatrix lhs, const OperatorMatrix& rhs) {
        lhs -= rhs;
        return lhs;
    }
    friend OperatorMatrix operator*(OperatorMatrix lhs, Complex scale) {
        lhs *= scale;
        return lhs;
    }
    friend OperatorMatrix operator*(Complex scale, OperatorMatrix rhs) {
        rhs *= scale;
        return rhs;
    }
    friend OperatorMatrix operator*(const OperatorMatrix& lhs, const OperatorMatrix& rhs);

private:
    HilbertLayout layout_;
    SparseCMatrix entries_;
};

/// Result of a Hermitian eigensolve. Eigenvalues ascending, in the units of
/// the input operator; eigenvector columns orthonormal.
struct EigenDecomposition {
    Eigen::VectorXd eigenvalues;
    DenseMatrix eigenvectors;
};

/// Bosonic lowering operator, <n-1|a|n> = sqrt(n).
DenseMatrix destroy(int n_levels);

/// Number operator diag(0, 1, ..., n_levels-1).
DenseMatrix number_op(int n_levels);

/// I ⊗ ... ⊗ local_op ⊗ ... ⊗ I at the given subsystem slot.
OperatorMatrix embed(const DenseMatrix& local_op, int subsystem_index,
                     const HilbertLayout& layout);

OperatorMatrix identity_operator(const HilbertLayout& layout);

/// Total excitation number: a†a + Σ_qubits n̂.
OperatorMatrix total_excitation_operator(const HilbertLayout& layout);

/// Exact diagonalization; requires Hermitian input (1e-10 relative).
EigenDecomposition diagonalize(const OperatorMatrix& h);

/// One (operator, rate) pair of the Lindblad dissipator; collapse operator
/// enters as sqrt(rate) * op.
struct CollapseChannel {
    OperatorMatrix op;
    double rate;  // same inverse-time unit as the Hamiltonian
    std::string tag;
};

/// Superoperator L with vec(ρ̇) = L vec(ρ), column-major vectorization.
/// All operators must share one layout, all rates must be >= 0.
SparseCMatrix vectorized_liouvillian(const OperatorMatrix& h,
                                     const std::vector<CollapseChannel>& collapse_ops);

/// Kronecker product of sparse matrices (A acts on the most significant index).
SparseCMatrix kron(const SparseCMatrix& a, const SparseCMatrix& b);

}  // namespace tcs

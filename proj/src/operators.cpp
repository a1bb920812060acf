#include "tcs/operators.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace tcs {

HilbertLayout::HilbertLayout(std::vector<int> subsystem_dims)
    : dims_(std::move(subsystem_dims)) {
    if (dims_.empty()) {
        throw std::invalid_argument("HilbertLayout: no subsystems");
    }
    total_dim_ = 1;
    for (int d : dims_) {
        if (d < 2) {
            throw std::invalid_argument("HilbertLayout: every subsystem dim must be >= 2");
        }
        total_dim_ *= d;
    }
}

int HilbertLayout::dim(int subsystem) const {
    if (subsystem < 0 || subsystem >= subsystem_count()) {
        throw std::out_of_range("HilbertLayout: subsystem index out of range");
    }
    return dims_[subsystem];
}

int HilbertLayout::state_index(std::span<const int> levels) const {
    if (static_cast<int>(levels.size()) != subsystem_count()) {
        throw std::invalid_argument("HilbertLayout: level tuple has wrong arity");
    }
    int idx = 0;
    for (int s = 0; s < subsystem_count(); ++s) {
        if (levels[s] < 0 || levels[s] >= dims_[s]) {
            throw std::out_of_range("HilbertLayout: level out of range");
        }
        idx = idx * dims_[s] + levels[s];
    }
    return idx;
}

std::vector<int> HilbertLayout::levels_of(int index) const {
    if (index < 0 || index >= total_dim_) {
        throw std::out_of_range("HilbertLayout: state index out of range");
    }
    std::vector<int> levels(dims_.size());
    for (int s = subsystem_count() - 1; s >= 0; --s) {
        levels[s] = index % dims_[s];
        index /= dims_[s];
    }
    return levels;
}

OperatorMatrix::OperatorMatrix(HilbertLayout layout, SparseCMatrix entries)
    : layout_(std::move(layout)), entries_(std::move(entries)) {
    if (entries_.rows() != layout_.total_dim() || entries_.cols() != layout_.total_dim()) {
        throw std::invalid_argument("OperatorMatrix: entries do not match layout dimension");
    }
    entries_.makeCompressed();
}

OperatorMatrix::OperatorMatrix(HilbertLayout layout, const DenseMatrix& entries)
    : OperatorMatrix(std::move(layout), SparseCMatrix(entries.sparseView())) {}

bool OperatorMatrix::is_hermitian(double rel_tol) const {
    const double scale = std::max(max_abs(), 1e-300);
    SparseCMatrix diff = entries_ - SparseCMatrix(entries_.adjoint());
    double worst = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k) {
        for (SparseCMatrix::InnerIterator it(diff, k); it; ++it) {
            worst = std::max(worst, std::abs(it.value()));
        }
    }
    return worst <= rel_tol * scale;
}

OperatorMatrix OperatorMatrix::adjoint() const {
    return OperatorMatrix(layout_, SparseCMatrix(entries_.adjoint()));
}

double OperatorMatrix::max_abs() const {
    double m = 0.0;
    for (int k = 0; k < entries_.outerSize(); ++k) {
        for (SparseCMatrix::InnerIterator it(entries_, k); it; ++it) {
            m = std::max(m, std::abs(it.value()));
        }
    }
    return m;
}

OperatorMatrix& OperatorMatrix::operator+=(const OperatorMatrix& rhs) {
    if (layout_ != rhs.layout_) {
        throw std::invalid_argument("OperatorMatrix: layout mismatch in +");
    }
    entries_ += rhs.entries_;
    return *this;
}

OperatorMatrix& OperatorMatrix::operator-=(const OperatorMatrix& rhs) {
    if (layout_ != rhs.layout_) {
        throw std::invalid_argument("OperatorMatrix: layout mismatch in -");
    }
    entries_ -= rhs.entries_;
    return *this;
}

OperatorMatrix& OperatorMatrix::operator*=(Complex scale) {
    entries_ *= scale;
    return *this;
}

OperatorMatrix operator*(const OperatorMatrix& lhs, const OperatorMatrix& rhs) {
    if (lhs.layout_ != rhs.layout_) {
        throw std::invalid_argument("OperatorMatrix: layout mismatch in *");
    }
    return OperatorMatrix(lhs.layout_, SparseCMatrix(lhs.entries_ * rhs.entries_));
}

DenseMatrix destroy(int n_levels) {
    if (n_levels < 2) {
        throw std::invalid_argument("destroy: need at least 2 levels");
    }
    DenseMatrix a = DenseMatrix::Zero(n_levels, n_levels);
    for (int n = 1; n < n_levels; ++n) {
        a(n - 1, n) = std::sqrt(static_cast<double>(n));
    }
    return a;
}

DenseMatrix number_op(int n_levels) {
    if (n_levels < 2) {
        throw std::invalid_argument("number_op: need at least 2 levels");
    }
    DenseMatrix n = DenseMatrix::Zero(n_levels, n_levels);
    for (int k = 0; k < n_levels; ++k) {
        n(k, k) = static_cast<double>(k);
    }
    return n;
}

OperatorMatrix embed(const DenseMatrix& local_op, int subsystem_index,
                     const HilbertLayout& layout) {
    if (subsystem_index < 0 || subsystem_index >= layout.subsystem_count()) {
        throw std::invalid_argument("embed: subsystem index out of range");
    }
    const int d = layout.dim(subsystem_index);
    if (local_op.rows() != d || local_op.cols() != d) {
        throw std::invalid_argument("embed: local operator dimension " +
                                    std::to_string(local_op.rows()) + "x" +
                                    std::to_string(local_op.cols()) +
                                    " does not match subsystem dim " + std::to_string(d));
    }
    int left = 1, right = 1;
    for (int s = 0; s < subsystem_index; ++s) left *= layout.dim(s);
    for (int s = subsystem_index + 1; s < layout.subsystem_count(); ++s) right *= layout.dim(s);

    std::vector<Eigen::Triplet<Complex>> triplets;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            const Complex v = local_op(i, j);
            if (v == Complex(0.0, 0.0)) continue;
            for (int l = 0; l < left; ++l) {
                for (int r = 0; r < right; ++r) {
                    const int row = (l * d + i) * right + r;
                    const int col = (l * d + j) * right + r;
                    triplets.emplace_back(row, col, v);
                }
            }
        }
    }
    SparseCMatrix out(layout.total_dim(), layout.total_dim());
    out.setFromTriplets(triplets.begin(), triplets.end());
    return OperatorMatrix(layout, std::move(out));
}

OperatorMatrix identity_operator(const HilbertLayout& layout) {
    SparseCMatrix id(layout.total_dim(), layout.total_dim());
    id.setIdentity();
    return OperatorMatrix(layout, std::move(id));
}

OperatorMatrix total_excitation_operator(const HilbertLayout& layout) {
    OperatorMatrix n_total = embed(number_op(layout.dim(0)), 0, layout);
    for (int s = 1; s < layout.subsystem_count(); ++s) {
        n_total += embed(number_op(layout.dim(s)), s, layout);
    }
    return n_total;
}

EigenDecomposition diagonalize(const OperatorMatrix& h) {
    if (!h.is_hermitian(1e-10)) {
        throw std::invalid_argument("diagonalize: operator is not Hermitian to 1e-10");
    }
    Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(h.dense());
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("diagonalize: eigensolver failed to converge");
    }
    return EigenDecomposition{solver.eigenvalues(), solver.eigenvectors()};
}

SparseCMatrix kron(const SparseCMatrix& a, const SparseCMatrix& b) {
    SparseCMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(static_cast<size_t>(a.nonZeros()) * static_cast<size_t>(b.nonZeros()));
    for (int ka = 0; ka < a.outerSize(); ++ka) {
        for (SparseCMatrix::InnerIterator ia(a, ka); ia; ++ia) {
            for (int kb = 0; kb < b.outerSize(); ++kb) {
                for (SparseCMatrix::InnerIterator ib(b, kb); ib; ++ib) {
                    triplets.emplace_back(ia.row() * b.rows() + ib.row(),
                                          ia.col() * b.cols() + ib.col(),
                                          ia.value() * ib.value());
                }
            }
        }
    }
    out.setFromTriplets(triplets.begin(), triplets.end());
    return out;
}

SparseCMatrix vectorized_liouvillian(const OperatorMatrix& h,
                                     const std::vector<CollapseChannel>& collapse_ops) {
    const int d = h.dim();
    SparseCMatrix id(d, d);
    id.setIdentity();

    const Complex minus_i(0.0, -1.0);
    // vec(Hρ) = (I⊗H)vec(ρ), vec(ρH) = (Hᵀ⊗I)vec(ρ), column-major.
    SparseCMatrix lv = minus_i * (kron(id, h.sparse()) -
                                  kron(SparseCMatrix(h.sparse().transpose()), id));

    for (const auto& ch : collapse_ops) {
        if (ch.op.layout() != h.layout()) {
            throw std::invalid_argument("vectorized_liouvillian: collapse operator layout mismatch");
        }
        if (ch.rate < 0.0) {
            throw std::invalid_argument("vectorized_liouvillian: negative collapse rate");
        }
        if (ch.rate == 0.0) continue;
        const SparseCMatrix& c = ch.op.sparse();
        SparseCMatrix cdc = SparseCMatrix(c.adjoint()) * c;
        lv += Complex(ch.rate) *
              (kron(SparseCMatrix(c.conjugate()), c) -
               Complex(0.5) * kron(id, cdc) -
               Complex(0.5) * kron(SparseCMatrix(cdc.transpose()), id));
    }
    lv.makeCompressed();
    return lv;
}

}  // namespace tcs

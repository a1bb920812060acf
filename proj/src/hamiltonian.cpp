#include "tcs/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tcs {

namespace {

constexpr double kMhzPerGhz = 1e3;

char level_letter(int level) {
    constexpr const char* letters = "gefhi";
    return level >= 0 && level < 5 ? letters[level] : '?';
}

std::string state_label(const HilbertLayout& layout, int index) {
    const auto levels = layout.levels_of(index);
    std::string s = "|";
    for (size_t q = 1; q < levels.size(); ++q) {
        s += level_letter(levels[q]);
    }
    if (levels.size() > 1) s += ',';
    s += std::to_string(levels[0]);
    s += '>';
    return s;
}

// Deterministic eigenbasis: ascending eigenvalues, first sizable component
// of each eigenvector rotated to be real positive.
EigenDecomposition sorted_eigs(const DenseMatrix& block) {
    Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(block);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("manifold eigensolve failed");
    }
    DenseMatrix vecs = solver.eigenvectors();
    for (int c = 0; c < vecs.cols(); ++c) {
        for (int r = 0; r < vecs.rows(); ++r) {
            const Complex v = vecs(r, c);
            if (std::abs(v) > 1e-12) {
                vecs.col(c) *= std::conj(v) / std::abs(v);
                break;
            }
        }
    }
    return EigenDecomposition{solver.eigenvalues(), std::move(vecs)};
}

}  // namespace

void TCModel::validate() const {
    if (omega_q_ghz.size() != g_mhz.size()) {
        throw std::invalid_argument("TCModel: frequency and coupling lists differ in length");
    }
    for (double g : g_mhz) {
        if (g <= 0.0) throw std::invalid_argument("TCModel: couplings must be positive");
    }
    if (layout.subsystem_count() != static_cast<int>(omega_q_ghz.size()) + 1) {
        throw std::invalid_argument("TCModel: layout does not match qubit count");
    }
    for (int s = 1; s < layout.subsystem_count(); ++s) {
        if (layout.dim(s) != 2) {
            throw std::invalid_argument("TCModel: qubit subsystems must be two-level");
        }
    }
}

void ThreeLevelModel::validate() const {
    if (qubits.empty()) {
        throw std::invalid_argument("ThreeLevelModel: at least one qubit");
    }
    for (const auto& q : qubits) {
        if (q.omega_f_ghz >= 2.0 * q.omega_e_ghz) {
            throw std::invalid_argument(
                "ThreeLevelModel: ω_f must lie below 2·ω_e (negative anharmonicity)");
        }
    }
    if (n_truncation < 2) {
        throw std::invalid_argument("ThreeLevelModel: cavity truncation must be >= 2");
    }
}

HilbertLayout tc_layout(int n_truncation, int n_qubits, int levels_per_qubit) {
    std::vector<int> dims;
    dims.reserve(n_qubits + 1);
    dims.push_back(n_truncation);
    for (int q = 0; q < n_qubits; ++q) dims.push_back(levels_per_qubit);
    return HilbertLayout(std::move(dims));
}

OperatorMatrix build_tc_hamiltonian(const TCModel& model) {
    model.validate();
    const auto& layout = model.layout;
    const int n_trunc = layout.dim(0);
    const DenseMatrix a = destroy(n_trunc);

    OperatorMatrix h = embed(DenseMatrix(model.omega_r_ghz * (a.adjoint() * a)), 0, layout);

    DenseMatrix sigma_z(2, 2);
    sigma_z << -1.0, 0.0, 0.0, 1.0;
    const DenseMatrix sigma_minus = destroy(2);

    const OperatorMatrix a_dag_full = embed(DenseMatrix(a.adjoint()), 0, layout);
    const OperatorMatrix a_full = embed(a, 0, layout);

    const int n_qubits = static_cast<int>(model.omega_q_ghz.size());
    for (int q = 0; q < n_qubits; ++q) {
        h += embed(DenseMatrix(0.5 * model.omega_q_ghz[q] * sigma_z), q + 1, layout);
        const double g_ghz = model.g_mhz[q] / kMhzPerGhz;
        const OperatorMatrix sm = embed(sigma_minus, q + 1, layout);
        OperatorMatrix coupling = a_dag_full * sm;
        coupling += coupling.adjoint();
        h += Complex(g_ghz) * coupling;
    }
    return h;
}

OperatorMatrix build_three_level_hamiltonian(const ThreeLevelModel& model) {
    model.validate();
    const HilbertLayout layout =
        tc_layout(model.n_truncation, static_cast<int>(model.qubits.size()), 3);
    const DenseMatrix a = destroy(model.n_truncation);
    const OperatorMatrix a_dag_full = embed(DenseMatrix(a.adjoint()), 0, layout);

    OperatorMatrix h = embed(DenseMatrix(model.omega_r_ghz * (a.adjoint() * a)), 0, layout);
    for (size_t q = 0; q < model.qubits.size(); ++q) {
        const auto& spec = model.qubits[q];
        DenseMatrix diag = DenseMatrix::Zero(3, 3);
        diag(1, 1) = spec.omega_e_ghz;
        diag(2, 2) = spec.omega_f_ghz;
        h += embed(diag, static_cast<int>(q) + 1, layout);

        // RWA of (a†+a)Σ g_ij|i⟩⟨j|: keep a†|i⟩⟨j| for ω_j > ω_i plus conjugates;
        // only adjacent-level couplings enter (g_gf = 0).
        DenseMatrix lower = DenseMatrix::Zero(3, 3);
        lower(0, 1) = spec.g_ge_mhz / kMhzPerGhz;
        lower(1, 2) = spec.g_ef_mhz / kMhzPerGhz;
        OperatorMatrix term = a_dag_full * embed(lower, static_cast<int>(q) + 1, layout);
        term += term.adjoint();
        h += term;
    }
    return h;
}

ManifoldBlock manifold_block(const OperatorMatrix& h, int n_exc) {
    if (n_exc < 0) {
        throw std::invalid_argument("manifold_block: excitation number must be nonnegative");
    }
    const auto& layout = h.layout();
    const OperatorMatrix n_total = total_excitation_operator(layout);

    // h must be block diagonal over excitation manifolds.
    const OperatorMatrix comm = h * n_total - n_total * h;
    const double scale = std::max(1.0, h.max_abs()) * std::max(1.0, n_total.max_abs());
    if (comm.max_abs() > 1e-10 * scale) {
        throw std::invalid_argument(
            "manifold_block: Hamiltonian does not conserve the total excitation number");
    }

    std::vector<int> indices;
    for (int i = 0; i < layout.total_dim(); ++i) {
        const auto levels = layout.levels_of(i);
        const int exc = std::accumulate(levels.begin(), levels.end(), 0);
        if (exc == n_exc) indices.push_back(i);
    }
    if (indices.empty()) {
        throw std::invalid_argument("manifold_block: no basis states with " +
                                    std::to_string(n_exc) + " excitations in this layout");
    }
    // Descending photon number, then ascending qubit levels: {|g,n⟩, |e,n−1⟩, ...}.
    std::sort(indices.begin(), indices.end(), [&](int lhs, int rhs) {
        const auto ll = layout.levels_of(lhs);
        const auto rl = layout.levels_of(rhs);
        if (ll[0] != rl[0]) return ll[0] > rl[0];
        return ll < rl;
    });

    ManifoldBlock out;
    out.n_excitations = n_exc;
    out.full_indices = indices;
    const int n = static_cast<int>(indices.size());
    out.block = DenseMatrix::Zero(n, n);
    const DenseMatrix hd = h.dense();
    for (int r = 0; r < n; ++r) {
        out.basis_labels.push_back(state_label(layout, indices[r]));
        for (int c = 0; c < n; ++c) {
            out.block(r, c) = hd(indices[r], indices[c]);
        }
    }
    return out;
}

std::vector<TransitionLine> transition_frequencies(std::span<const ManifoldBlock> blocks,
                                                   const OperatorMatrix* drive_op) {
    std::vector<const ManifoldBlock*> sorted;
    for (const auto& b : blocks) sorted.push_back(&b);
    std::sort(sorted.begin(), sorted.end(), [](const ManifoldBlock* a, const ManifoldBlock* b) {
        return a->n_excitations < b->n_excitations;
    });
    for (size_t k = 1; k < sorted.size(); ++k) {
        if (sorted[k]->n_excitations != sorted[k - 1]->n_excitations + 1) {
            throw std::invalid_argument("transition_frequencies: manifolds must be consecutive");
        }
    }

    std::vector<TransitionLine> lines;
    for (size_t k = 0; k + 1 < sorted.size(); ++k) {
        const auto lower = sorted_eigs(sorted[k]->block);
        const auto upper = sorted_eigs(sorted[k + 1]->block);
        for (int i = 0; i < lower.eigenvalues.size(); ++i) {
            for (int j = 0; j < upper.eigenvalues.size(); ++j) {
                TransitionLine line;
                line.lower_manifold = sorted[k]->n_excitations;
                line.lower_index = i;
                line.upper_index = j;
                line.freq_ghz = upper.eigenvalues[j] - lower.eigenvalues[i];
                line.label = "n" + std::to_string(line.lower_manifold) + ":" +
                             std::to_string(i) + "->n" +
                             std::to_string(line.lower_manifold + 1) + ":" +
                             std::to_string(j);
                if (drive_op) {
                    const int dim = drive_op->dim();
                    Eigen::VectorXcd lower_full = Eigen::VectorXcd::Zero(dim);
                    Eigen::VectorXcd upper_full = Eigen::VectorXcd::Zero(dim);
                    for (int r = 0; r < lower.eigenvectors.rows(); ++r) {
                        lower_full[sorted[k]->full_indices[r]] = lower.eigenvectors(r, i);
                    }
                    for (int r = 0; r < upper.eigenvectors.rows(); ++r) {
                        upper_full[sorted[k + 1]->full_indices[r]] = upper.eigenvectors(r, j);
                    }
                    line.drive_weight =
                        std::abs(upper_full.dot(drive_op->sparse() * lower_full));
                }
                lines.push_back(std::move(line));
            }
        }
    }
    return lines;
}

std::pair<double, double> jc_eigenvalues(double omega_r_ghz, double omega_e_ghz,
                                         double g_mhz) {
    if (g_mhz <= 0.0) {
        throw std::invalid_argument("jc_eigenvalues: coupling must be positive");
    }
    const double g = g_mhz / kMhzPerGhz;
    const double mean = 0.5 * (omega_r_ghz + omega_e_ghz);
    const double delta = omega_r_ghz - omega_e_ghz;
    const double half_split = 0.5 * std::sqrt(4.0 * g * g + delta * delta);
    return {mean - half_split, mean + half_split};
}

double collective_splitting(std::span<const double> g_mhz) {
    if (g_mhz.empty()) {
        throw std::invalid_argument("collective_splitting: empty coupling list");
    }
    double sum_sq = 0.0;
    for (double g : g_mhz) sum_sq += g * g;
    return 2.0 * std::sqrt(sum_sq);
}

double dispersive_drift(std::span<const double> g_mhz, std::span<const double> delta_ghz) {
    if (g_mhz.size() != delta_ghz.size()) {
        throw std::invalid_argument("dispersive_drift: list length mismatch");
    }
    double drift = 0.0;
    for (size_t i = 0; i < g_mhz.size(); ++i) {
        if (delta_ghz[i] == 0.0) {
            throw std::invalid_argument(
                "dispersive_drift: detuning is zero, the dispersive formula is invalid");
        }
        drift += g_mhz[i] * g_mhz[i] / (delta_ghz[i] * kMhzPerGhz);
    }
    return drift;
}

}  // namespace tcs

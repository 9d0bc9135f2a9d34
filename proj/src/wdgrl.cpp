#include "wdgrl.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace wdtl {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

Tensor Critic::forward(Tape& tape, const Tensor& h) const {
    Tensor a = tape.relu(tape.linear(h, l1.w, l1.b));
    return tape.linear(a, l2.w, l2.b);
}

std::vector<Tensor> Critic::params() const {
    return {l1.w, l1.b, l2.w, l2.b};
}

Critic make_critic(std::mt19937_64& rng, int in, int hidden) {
    Critic c;
    c.l1 = make_dense(hidden, in, rng, "critic1");
    c.l2 = make_dense(1, hidden, rng, "critic2");
    return c;
}

Tensor empirical_wasserstein(Tape& tape, const Critic& critic,
                             const Tensor& h_s, const Tensor& h_t) {
    if (h_s->shape[0] < 1 || h_t->shape[0] < 1)
        throw ContractError("empirical_wasserstein: empty batch");
    Tensor mean_s = tape.mean(critic.forward(tape, h_s));
    Tensor mean_t = tape.mean(critic.forward(tape, h_t));
    return tape.sub(mean_s, mean_t);
}

Tensor interpolates(const Tensor& h_s, const Tensor& h_t, std::mt19937_64& rng) {
    if (h_s->shape != h_t->shape)
        throw DimensionError("interpolates: batch shapes must match");
    const int B = h_s->shape[0], D = h_s->shape[1];
    Tensor h_r = make_tensor({B, D});
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int i = 0; i < B; ++i) {
        const double eps = uni(rng);
        for (int d = 0; d < D; ++d)
            h_r->value[i * D + d] = eps * h_s->value[i * D + d] +
                                    (1.0 - eps) * h_t->value[i * D + d];
    }
    return h_r;
}

Tensor assemble_h(const Tensor& h_s, const Tensor& h_t, const Tensor& h_r) {
    if (h_s->shape[1] != h_t->shape[1] || h_s->shape[1] != h_r->shape[1])
        throw DimensionError("assemble_h: feature widths must match");
    const int D = h_s->shape[1];
    const int M = h_s->shape[0] + h_t->shape[0] + h_r->shape[0];
    Tensor H = make_tensor({M, D});
    auto it = std::copy(h_s->value.begin(), h_s->value.end(), H->value.begin());
    it = std::copy(h_t->value.begin(), h_t->value.end(), it);
    std::copy(h_r->value.begin(), h_r->value.end(), it);
    return H;
}

template <typename Scalar>
static Tensor gradient_penalty_impl(Tape& tape, const Critic& critic,
                                    const Tensor& H, int M, int D, int hidden) {
    using SMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                               Eigen::RowMajor>;
    Tensor W1 = critic.l1.w;
    Tensor b1 = critic.l1.b;
    Tensor w2 = critic.l2.w;

    auto W1m = std::make_shared<SMat>(
        CMapMat(W1->value.data(), hidden, D).cast<Scalar>());
    const SMat Hm = CMapMat(H->value.data(), M, D).cast<Scalar>();

    // Z = H W1^T + b1; S = 1[Z > 0]; A = S .* w2; G = A W1 (rows are
    // grad_h r_c per feature row)
    auto S = std::make_shared<SMat>(M, hidden);
    auto A = std::make_shared<SMat>(M, hidden);
    {
        const SMat Z = Hm * W1m->transpose();
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < hidden; ++j) {
                const Scalar s =
                    (Z(i, j) + static_cast<Scalar>(b1->value[j])) > Scalar(0)
                        ? Scalar(1)
                        : Scalar(0);
                (*S)(i, j) = s;
                (*A)(i, j) = s * static_cast<Scalar>(w2->value[j]);
            }
    }
    auto G = std::make_shared<SMat>(M, D);
    G->noalias() = (*A) * (*W1m);

    auto norms = std::make_shared<Eigen::VectorXd>(M);
    double penalty = 0.0;
    for (int i = 0; i < M; ++i) {
        // scalar norm: bitwise reproducible regardless of row alignment
        double ss = 0.0;
        for (int d = 0; d < D; ++d) {
            const double g = static_cast<double>((*G)(i, d));
            ss += g * g;
        }
        const double n = std::sqrt(ss);
        (*norms)(i) = n;
        const double d = n - 1.0;
        penalty += d * d;
    }
    penalty /= M;

    Tensor out = make_tensor({1}, std::vector<double>{penalty},
                             W1->requires_grad || w2->requires_grad);
    return tape.custom(out, [W1, w2, W1m, S, A, G, norms, out, M, D, hidden] {
        const double gout = out->grad[0];
        if (gout == 0.0) return;
        // per-row chain factor 2(n-1)/n / M; near-zero gradient rows are
        // skipped (penalty locally flat in the direction scaling)
        Eigen::Vector<Scalar, Eigen::Dynamic> coef(M);
        for (int i = 0; i < M; ++i) {
            const double n = (*norms)(i);
            coef(i) = static_cast<Scalar>(
                n > 1e-12 ? gout * 2.0 * (n - 1.0) / (n * M) : 0.0);
        }
        if (W1->requires_grad) {
            // dW1 = A^T diag(coef) G
            const SMat CA = coef.asDiagonal() * (*A);
            const SMat T = CA.transpose() * (*G);
            MapMat(W1->grad.data(), hidden, D) += T.template cast<double>();
        }
        if (w2->requires_grad) {
            const SMat Q = (*G) * W1m->transpose(); // Q(i,j) = W1_j . G_i
            for (int j = 0; j < hidden; ++j) {
                double acc = 0.0;
                for (int i = 0; i < M; ++i)
                    acc += static_cast<double>(coef(i)) *
                           static_cast<double>((*S)(i, j)) *
                           static_cast<double>(Q(i, j));
                w2->grad[j] += acc;
            }
        }
    });
}

Tensor gradient_penalty(Tape& tape, const Critic& critic, const Tensor& H) {
    const int M = H->shape[0];
    if (M < 1) throw ContractError("gradient_penalty: empty feature set");
    const int D = H->shape[1];
    const int hidden = critic.hidden_dim();
    if (D != critic.in_dim())
        throw DimensionError("gradient_penalty: feature width mismatch");
    return tape.precision32()
               ? gradient_penalty_impl<float>(tape, critic, H, M, D, hidden)
               : gradient_penalty_impl<double>(tape, critic, H, M, D, hidden);
}

Tensor critic_objective(Tape& tape, const Critic& critic, const Tensor& h_s,
                        const Tensor& h_t, double rho, std::mt19937_64& rng) {
    if (rho < 0.0) throw ContractError("critic_objective: rho must be >= 0");
    Tensor l_wd = empirical_wasserstein(tape, critic, h_s, h_t);
    Tensor h_r = interpolates(h_s, h_t, rng);
    Tensor H = assemble_h(h_s, h_t, h_r);
    Tensor l_grad = gradient_penalty(tape, critic, H);
    return tape.sub(l_wd, tape.scale(l_grad, rho));
}

double w1_empirical_1d(std::vector<double> xs, std::vector<double> ys) {
    if (xs.size() != ys.size())
        throw ContractError("w1_empirical_1d: sample counts must match");
    if (xs.empty()) throw ContractError("w1_empirical_1d: empty samples");
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    double s = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) s += std::abs(xs[i] - ys[i]);
    return s / static_cast<double>(xs.size());
}

} // namespace wdtl

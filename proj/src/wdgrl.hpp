#pragma once
// Domain-adaptation core: the critic network, empirical Wasserstein-1
// estimate, straight-line interpolates, gradient penalty with a
// closed-form second-order path, the critic objective, and an exact
// sort-based 1-D Wasserstein-1 oracle.

#include <random>
#include <vector>

#include "nn.hpp"
#include "tensor.hpp"

namespace wdtl {

// r_c(h) = w2 . relu(W1 h + b1) + b2. The model critic is 896->128->1;
// the input width is parameterized so the same code runs the 1-D duality
// experiments.
struct Critic {
    DenseLayer l1; // [hidden, in]
    DenseLayer l2; // [1, hidden]

    int in_dim() const { return l1.w->shape[1]; }
    int hidden_dim() const { return l1.w->shape[0]; }

    // h: [B, in] -> [B, 1] scores
    Tensor forward(Tape& tape, const Tensor& h) const;
    std::vector<Tensor> params() const;
};

Critic make_critic(std::mt19937_64& rng, int in = kFeatureDim, int hidden = 128);

// mean(r_c(h_s)) - mean(r_c(h_t)); differentiable w.r.t. theta_c and,
// when h carries grad, w.r.t. the features.
Tensor empirical_wasserstein(Tape& tape, const Critic& critic,
                             const Tensor& h_s, const Tensor& h_t);

// h_r[i] = eps_i*h_s[i] + (1-eps_i)*h_t[i], one eps ~ U(0,1) per pair.
Tensor interpolates(const Tensor& h_s, const Tensor& h_t, std::mt19937_64& rng);

// Row concatenation {h_s, h_t, h_r}; plain values, no grad.
Tensor assemble_h(const Tensor& h_s, const Tensor& h_t, const Tensor& h_r);

// mean over rows of (||grad_h r_c(h)||_2 - 1)^2. The gradient w.r.t.
// theta_c uses the closed form for the fixed relu MLP critic (the relu
// indicator is treated as locally constant).
Tensor gradient_penalty(Tape& tape, const Critic& critic, const Tensor& H);

// l_wd - rho * l_grad, ready for the ascent step on theta_c.
Tensor critic_objective(Tape& tape, const Critic& critic, const Tensor& h_s,
                        const Tensor& h_t, double rho, std::mt19937_64& rng);

// Exact primal Wasserstein-1 between equal-weight empirical 1-D samples.
double w1_empirical_1d(std::vector<double> xs, std::vector<double> ys);

} // namespace wdtl

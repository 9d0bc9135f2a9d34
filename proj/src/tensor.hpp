#pragma once
// Dense tensors with reverse-mode automatic differentiation on a
// define-by-run tape. Values are stored in 64-bit throughout; a tape
// can optionally run its matrix products in 32-bit (training fast
// path), in which case results are the float products rounded back to
// double. The tape is rebuilt every iteration and freed after backward.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "errors.hpp"

namespace wdtl {

struct TensorData {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad; // allocated iff requires_grad
    bool requires_grad = false;
    std::string name;

    int size() const { return static_cast<int>(value.size()); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

using Tensor = std::shared_ptr<TensorData>;

Tensor make_tensor(std::vector<int> shape, bool requires_grad = false,
                   std::string name = {});
Tensor make_tensor(std::vector<int> shape, std::vector<double> value,
                   bool requires_grad = false, std::string name = {});
// Value copy that does not participate in differentiation.
Tensor detach(const Tensor& t);

int shape_product(const std::vector<int>& shape);

class Tape {
public:
    // Elementwise / reductions
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor scale(const Tensor& a, double c);
    Tensor sum(const Tensor& a);                      // -> [1]
    Tensor mean(const Tensor& a);                     // -> [1]
    Tensor dot(const Tensor& a, const Tensor& b);     // -> [1]
    Tensor relu(const Tensor& a);

    // x:[B,in] w:[out,in] b:[out] -> [B,out]
    Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
    // x:[B,C,L] w:[F,C,k] b:[F] -> [B,F,Lout], valid convolution
    Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride);
    // x:[B,C,L] -> [B,C,Lout]; gradient routes to the first argmax on ties
    Tensor maxpool1d(const Tensor& x, int window, int stride);
    // [B,C,L] -> [B,C*L]
    Tensor flatten(const Tensor& x);
    // x:[B,D] -> [count,D], rows start..start+count-1
    Tensor slice_rows(const Tensor& x, int start, int count);
    // row-wise, max-subtracted
    Tensor softmax(const Tensor& z);
    // probs:[B,K] rows summing to 1 within 1e-5; probabilities clamped
    // to [1e-12, 1] inside the log
    Tensor cross_entropy(const Tensor& probs, const std::vector<int>& labels);

    // Register an externally computed node; `backward` must scale its
    // contribution by out->grad.
    Tensor custom(Tensor out, std::function<void()> backward);

    // Seeds grad(loss)=1 and runs the tape in reverse. Throws on
    // non-scalar loss.
    void backward(const Tensor& loss);

    void clear();
    size_t node_count() const { return nodes_.size(); }

    // 32-bit matrix products in linear/conv1d (and the gradient-penalty
    // kernels built on this tape). Elementwise ops, reductions, softmax
    // and the loss stay 64-bit.
    void set_precision32(bool on) { fp32_ = on; }
    bool precision32() const { return fp32_; }

private:
    bool fp32_ = false;
    struct Node {
        Tensor out;
        std::function<void()> back;
    };
    std::vector<Node> nodes_;

    Tensor fresh(std::vector<int> shape, bool requires_grad);
    void push(Tensor out, std::function<void()> back);
};

int conv_out_len(int len, int k, int stride);

// Central-difference gradient verification.
struct GradEntry {
    std::string param;
    int index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    bool nonfinite = false;
};

struct GradReport {
    double max_abs_error = 0.0;
    double max_rel_error = 0.0;
    bool all_finite = true;
    std::vector<GradEntry> entries;
};

// `f` re-evaluates the scalar objective at the current parameter values;
// `analytic` holds the already-computed gradient per parameter tensor.
GradReport finite_diff_check(const std::function<double()>& f,
                             const std::vector<Tensor>& params,
                             const std::vector<std::vector<double>>& analytic,
                             double step);

} // namespace wdtl

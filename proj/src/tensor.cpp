#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

namespace wdtl {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
static Mat<Scalar> cast_mat(const double* p, int rows, int cols) {
    return CMapMat(p, rows, cols).cast<Scalar>();
}

int shape_product(const std::vector<int>& shape) {
    int n = 1;
    for (int d : shape) {
        if (d <= 0) throw DimensionError("tensor dimension must be positive");
        n *= d;
    }
    return n;
}

Tensor make_tensor(std::vector<int> shape, bool requires_grad, std::string name) {
    auto t = std::make_shared<TensorData>();
    int n = shape_product(shape);
    t->shape = std::move(shape);
    t->value.assign(n, 0.0);
    t->requires_grad = requires_grad;
    if (requires_grad) t->grad.assign(n, 0.0);
    t->name = std::move(name);
    return t;
}

Tensor make_tensor(std::vector<int> shape, std::vector<double> value,
                   bool requires_grad, std::string name) {
    int n = shape_product(shape);
    if (static_cast<int>(value.size()) != n)
        throw DimensionError("value length does not match shape");
    auto t = std::make_shared<TensorData>();
    t->shape = std::move(shape);
    t->value = std::move(value);
    t->requires_grad = requires_grad;
    if (requires_grad) t->grad.assign(n, 0.0);
    t->name = std::move(name);
    return t;
}

Tensor detach(const Tensor& t) {
    auto d = std::make_shared<TensorData>();
    d->shape = t->shape;
    d->value = t->value;
    d->requires_grad = false;
    d->name = t->name;
    return d;
}

Tensor Tape::fresh(std::vector<int> shape, bool requires_grad) {
    return make_tensor(std::move(shape), requires_grad);
}

void Tape::push(Tensor out, std::function<void()> back) {
    nodes_.push_back({std::move(out), std::move(back)});
}

constexpr double kMinProb = 1e-12;

static void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a->shape != b->shape) {
        std::ostringstream msg;
        msg << op << ": shape mismatch";
        throw DimensionError(msg.str());
    }
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = fresh(a->shape, a->requires_grad || b->requires_grad);
    for (int i = 0; i < a->size(); ++i) out->value[i] = a->value[i] + b->value[i];
    push(out, [a, b, out] {
        for (int i = 0; i < out->size(); ++i) {
            if (a->requires_grad) a->grad[i] += out->grad[i];
            if (b->requires_grad) b->grad[i] += out->grad[i];
        }
    });
    return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = fresh(a->shape, a->requires_grad || b->requires_grad);
    for (int i = 0; i < a->size(); ++i) out->value[i] = a->value[i] - b->value[i];
    push(out, [a, b, out] {
        for (int i = 0; i < out->size(); ++i) {
            if (a->requires_grad) a->grad[i] += out->grad[i];
            if (b->requires_grad) b->grad[i] -= out->grad[i];
        }
    });
    return out;
}

Tensor Tape::scale(const Tensor& a, double c) {
    Tensor out = fresh(a->shape, a->requires_grad);
    for (int i = 0; i < a->size(); ++i) out->value[i] = c * a->value[i];
    push(out, [a, c, out] {
        if (!a->requires_grad) return;
        for (int i = 0; i < out->size(); ++i) a->grad[i] += c * out->grad[i];
    });
    return out;
}

Tensor Tape::sum(const Tensor& a) {
    Tensor out = fresh({1}, a->requires_grad);
    double s = 0.0;
    for (double v : a->value) s += v;
    out->value[0] = s;
    push(out, [a, out] {
        if (!a->requires_grad) return;
        double g = out->grad[0];
        for (int i = 0; i < a->size(); ++i) a->grad[i] += g;
    });
    return out;
}

Tensor Tape::mean(const Tensor& a) {
    Tensor out = fresh({1}, a->requires_grad);
    double s = 0.0;
    for (double v : a->value) s += v;
    const double inv = 1.0 / a->size();
    out->value[0] = s * inv;
    push(out, [a, out, inv] {
        if (!a->requires_grad) return;
        double g = out->grad[0] * inv;
        for (int i = 0; i < a->size(); ++i) a->grad[i] += g;
    });
    return out;
}

Tensor Tape::dot(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "dot");
    Tensor out = fresh({1}, a->requires_grad || b->requires_grad);
    double s = 0.0;
    for (int i = 0; i < a->size(); ++i) s += a->value[i] * b->value[i];
    out->value[0] = s;
    push(out, [a, b, out] {
        double g = out->grad[0];
        for (int i = 0; i < a->size(); ++i) {
            if (a->requires_grad) a->grad[i] += g * b->value[i];
            if (b->requires_grad) b->grad[i] += g * a->value[i];
        }
    });
    return out;
}

Tensor Tape::relu(const Tensor& a) {
    Tensor out = fresh(a->shape, a->requires_grad);
    for (int i = 0; i < a->size(); ++i)
        out->value[i] = a->value[i] > 0.0 ? a->value[i] : 0.0;
    push(out, [a, out] {
        if (!a->requires_grad) return;
        for (int i = 0; i < a->size(); ++i)
            if (a->value[i] > 0.0) a->grad[i] += out->grad[i];
    });
    return out;
}

template <typename Scalar>
static std::function<void()> linear_impl(const Tensor& x, const Tensor& w,
                                         const Tensor& b, const Tensor& out,
                                         int B, int in, int out_dim) {
    auto X = std::make_shared<Mat<Scalar>>(cast_mat<Scalar>(x->value.data(), B, in));
    auto W = std::make_shared<Mat<Scalar>>(cast_mat<Scalar>(w->value.data(), out_dim, in));
    {
        Mat<Scalar> Y = *X * W->transpose();
        MapMat Ym(out->value.data(), B, out_dim);
        Ym = Y.template cast<double>();
        for (int r = 0; r < B; ++r)
            for (int c = 0; c < out_dim; ++c) Ym(r, c) += b->value[c];
    }
    return [x, w, b, out, X, W, B, in, out_dim] {
        const Mat<Scalar> dY = cast_mat<Scalar>(out->grad.data(), B, out_dim);
        if (x->requires_grad) {
            const Mat<Scalar> T = dY * (*W);
            MapMat(x->grad.data(), B, in) += T.template cast<double>();
        }
        if (w->requires_grad) {
            const Mat<Scalar> T = dY.transpose() * (*X);
            MapMat(w->grad.data(), out_dim, in) += T.template cast<double>();
        }
        if (b->requires_grad) {
            CMapMat dYd(out->grad.data(), B, out_dim);
            for (int c = 0; c < out_dim; ++c) {
                double s = 0.0;
                for (int r = 0; r < B; ++r) s += dYd(r, c);
                b->grad[c] += s;
            }
        }
    };
}

Tensor Tape::linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x->shape.size() != 2 || w->shape.size() != 2 || b->shape.size() != 1)
        throw DimensionError("linear: expected x[B,in], w[out,in], b[out]");
    const int B = x->shape[0], in = x->shape[1];
    const int out_dim = w->shape[0];
    if (w->shape[1] != in || b->shape[0] != out_dim)
        throw DimensionError("linear: weight/bias shape mismatch");

    Tensor out = fresh({B, out_dim},
                       x->requires_grad || w->requires_grad || b->requires_grad);
    push(out, fp32_ ? linear_impl<float>(x, w, b, out, B, in, out_dim)
                    : linear_impl<double>(x, w, b, out, B, in, out_dim));
    return out;
}

int conv_out_len(int len, int k, int stride) {
    if (k < 1 || stride < 1) throw ContractError("conv: kernel and stride must be >= 1");
    if (len < k) throw DimensionError("conv: input shorter than kernel");
    return (len - k) / stride + 1;
}

template <typename Scalar>
static std::function<void()> conv1d_impl(const Tensor& x, const Tensor& w,
                                         const Tensor& b, const Tensor& out,
                                         int stride) {
    const int B = x->shape[0], C = x->shape[1], L = x->shape[2];
    const int F = w->shape[0], k = w->shape[2];
    const int Lo = out->shape[2];
    // im2col: Col[(bi*Lo + o), c*k + t] = x[bi, c, o*stride + t]; the
    // whole batch is then a single GEMM against the flattened filters,
    // with a scatter from [B*Lo, F] back into the [B, F, Lo] layout
    const int Ck = C * k;
    const long R = static_cast<long>(B) * Lo;
    auto Col = std::make_shared<Mat<Scalar>>(R, Ck);
    for (int bi = 0; bi < B; ++bi)
        for (int o = 0; o < Lo; ++o) {
            Scalar* dst = Col->data() + (static_cast<long>(bi) * Lo + o) * Ck;
            const int base = o * stride;
            for (int c = 0; c < C; ++c) {
                const double* src = x->value.data() + (bi * C + c) * L + base;
                for (int t = 0; t < k; ++t)
                    dst[c * k + t] = static_cast<Scalar>(src[t]);
            }
        }
    auto Wf = std::make_shared<Mat<Scalar>>(cast_mat<Scalar>(w->value.data(), F, Ck));
    {
        const Mat<Scalar> Y2 = (*Col) * Wf->transpose(); // [R, F]
        for (int bi = 0; bi < B; ++bi)
            for (int f = 0; f < F; ++f) {
                double* yr = out->value.data() + (static_cast<long>(bi) * F + f) * Lo;
                const Scalar* src = Y2.data() + static_cast<long>(bi) * Lo * F + f;
                const double bias = b->value[f];
                for (int o = 0; o < Lo; ++o)
                    yr[o] = static_cast<double>(src[static_cast<long>(o) * F]) + bias;
            }
    }
    return [x, w, b, out, Col, Wf, B, C, L, F, k, Lo, stride, Ck, R] {
        if (b->requires_grad)
            for (int f = 0; f < F; ++f) {
                // scalar reduction: keeps results independent of the
                // heap alignment the vectorized path peels on
                double s = 0.0;
                for (int bi = 0; bi < B; ++bi) {
                    const double* gyr =
                        out->grad.data() + (static_cast<long>(bi) * F + f) * Lo;
                    for (int o = 0; o < Lo; ++o) s += gyr[o];
                }
                b->grad[f] += s;
            }
        if (!w->requires_grad && !x->requires_grad) return;
        Mat<Scalar> dY2(R, F); // gather of out->grad into [B*Lo, F]
        for (int bi = 0; bi < B; ++bi)
            for (int f = 0; f < F; ++f) {
                const double* gyr =
                    out->grad.data() + (static_cast<long>(bi) * F + f) * Lo;
                Scalar* dst = dY2.data() + static_cast<long>(bi) * Lo * F + f;
                for (int o = 0; o < Lo; ++o)
                    dst[static_cast<long>(o) * F] = static_cast<Scalar>(gyr[o]);
            }
        if (w->requires_grad) {
            const Mat<Scalar> T = dY2.transpose() * (*Col);
            MapMat(w->grad.data(), F, Ck) += T.template cast<double>();
        }
        if (x->requires_grad) {
            const Mat<Scalar> dCol = dY2 * (*Wf); // [R, Ck], col2im below
            for (int bi = 0; bi < B; ++bi)
                for (int o = 0; o < Lo; ++o) {
                    const int base = o * stride;
                    const Scalar* src =
                        dCol.data() + (static_cast<long>(bi) * Lo + o) * Ck;
                    for (int c = 0; c < C; ++c) {
                        double* gxr = x->grad.data() + (bi * C + c) * L + base;
                        for (int t = 0; t < k; ++t)
                            gxr[t] += static_cast<double>(src[c * k + t]);
                    }
                }
        }
    };
}

Tensor Tape::conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
    if (x->shape.size() != 3 || w->shape.size() != 3 || b->shape.size() != 1)
        throw DimensionError("conv1d: expected x[B,C,L], w[F,C,k], b[F]");
    const int B = x->shape[0], C = x->shape[1], L = x->shape[2];
    const int F = w->shape[0], k = w->shape[2];
    if (w->shape[1] != C || b->shape[0] != F)
        throw DimensionError("conv1d: filter shape mismatch");
    const int Lo = conv_out_len(L, k, stride);

    Tensor out = fresh({B, F, Lo},
                       x->requires_grad || w->requires_grad || b->requires_grad);
    push(out, fp32_ ? conv1d_impl<float>(x, w, b, out, stride)
                    : conv1d_impl<double>(x, w, b, out, stride));
    return out;
}

Tensor Tape::maxpool1d(const Tensor& x, int window, int stride) {
    if (x->shape.size() != 3) throw DimensionError("maxpool1d: expected x[B,C,L]");
    if (window < 1 || stride < 1)
        throw ContractError("maxpool1d: window and stride must be >= 1");
    const int B = x->shape[0], C = x->shape[1], L = x->shape[2];
    if (L < window) throw DimensionError("maxpool1d: input shorter than window");
    const int Lo = (L - window) / stride + 1;

    Tensor out = fresh({B, C, Lo}, x->requires_grad);
    auto argmax = std::make_shared<std::vector<int>>(
        static_cast<size_t>(B) * C * Lo);
    for (int bi = 0; bi < B; ++bi) {
        for (int c = 0; c < C; ++c) {
            const double* xr = x->value.data() + (bi * C + c) * L;
            double* yr = out->value.data() + (bi * C + c) * Lo;
            int* ar = argmax->data() + (bi * C + c) * Lo;
            for (int o = 0; o < Lo; ++o) {
                int best = o * stride;
                double bv = xr[best];
                for (int t = 1; t < window; ++t) {
                    const int idx = o * stride + t;
                    if (xr[idx] > bv) { bv = xr[idx]; best = idx; }
                }
                yr[o] = bv;
                ar[o] = best;
            }
        }
    }
    push(out, [x, out, argmax, B, C, L, Lo] {
        if (!x->requires_grad) return;
        for (int bi = 0; bi < B; ++bi)
            for (int c = 0; c < C; ++c) {
                const double* gyr = out->grad.data() + (bi * C + c) * Lo;
                const int* ar = argmax->data() + (bi * C + c) * Lo;
                double* gxr = x->grad.data() + (bi * C + c) * L;
                for (int o = 0; o < Lo; ++o) gxr[ar[o]] += gyr[o];
            }
    });
    return out;
}

Tensor Tape::flatten(const Tensor& x) {
    if (x->shape.size() < 2) throw DimensionError("flatten: expected rank >= 2");
    int rest = 1;
    for (size_t i = 1; i < x->shape.size(); ++i) rest *= x->shape[i];
    Tensor out = fresh({x->shape[0], rest}, x->requires_grad);
    out->value = x->value;
    push(out, [x, out] {
        if (!x->requires_grad) return;
        for (int i = 0; i < x->size(); ++i) x->grad[i] += out->grad[i];
    });
    return out;
}

Tensor Tape::slice_rows(const Tensor& x, int start, int count) {
    if (x->shape.size() != 2) throw DimensionError("slice_rows: expected x[B,D]");
    const int B = x->shape[0], D = x->shape[1];
    if (start < 0 || count < 1 || start + count > B)
        throw DimensionError("slice_rows: range out of bounds");
    Tensor out = fresh({count, D}, x->requires_grad);
    std::copy(x->value.begin() + static_cast<long>(start) * D,
              x->value.begin() + static_cast<long>(start + count) * D,
              out->value.begin());
    push(out, [x, out, start, count, D] {
        if (!x->requires_grad) return;
        for (int i = 0; i < count * D; ++i)
            x->grad[static_cast<long>(start) * D + i] += out->grad[i];
    });
    return out;
}

Tensor Tape::softmax(const Tensor& z) {
    if (z->shape.size() != 2) throw DimensionError("softmax: expected z[B,K]");
    const int B = z->shape[0], K = z->shape[1];
    for (double v : z->value)
        if (!std::isfinite(v)) throw ContractError("softmax: non-finite input");
    Tensor out = fresh(z->shape, z->requires_grad);
    for (int r = 0; r < B; ++r) {
        const double* zr = z->value.data() + r * K;
        double* yr = out->value.data() + r * K;
        double m = zr[0];
        for (int c = 1; c < K; ++c) m = std::max(m, zr[c]);
        double s = 0.0;
        for (int c = 0; c < K; ++c) { yr[c] = std::exp(zr[c] - m); s += yr[c]; }
        for (int c = 0; c < K; ++c) yr[c] /= s;
    }
    push(out, [z, out, B, K] {
        if (!z->requires_grad) return;
        for (int r = 0; r < B; ++r) {
            const double* yr = out->value.data() + r * K;
            const double* gyr = out->grad.data() + r * K;
            double* gzr = z->grad.data() + r * K;
            double dotp = 0.0;
            for (int c = 0; c < K; ++c) dotp += gyr[c] * yr[c];
            for (int c = 0; c < K; ++c) gzr[c] += yr[c] * (gyr[c] - dotp);
        }
    });
    return out;
}

Tensor Tape::cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
    if (probs->shape.size() != 2) throw DimensionError("cross_entropy: expected [B,K]");
    const int B = probs->shape[0], K = probs->shape[1];
    if (static_cast<int>(labels.size()) != B)
        throw DimensionError("cross_entropy: label count mismatch");
    for (int r = 0; r < B; ++r) {
        if (labels[r] < 0 || labels[r] >= K)
            throw ContractError("cross_entropy: label out of range");
        double s = 0.0;
        for (int c = 0; c < K; ++c) s += probs->value[r * K + c];
        if (std::abs(s - 1.0) > 1e-5)
            throw ContractError("cross_entropy: probability row does not sum to 1");
    }
    Tensor out = fresh({1}, probs->requires_grad);
    double loss = 0.0;
    for (int r = 0; r < B; ++r) {
        double p = probs->value[r * K + labels[r]];
        loss -= std::log(std::clamp(p, kMinProb, 1.0));
    }
    out->value[0] = loss / B;
    auto lab = std::make_shared<std::vector<int>>(labels);
    push(out, [probs, out, lab, B, K] {
        if (!probs->requires_grad) return;
        const double g = out->grad[0] / B;
        for (int r = 0; r < B; ++r) {
            const int idx = r * K + (*lab)[r];
            const double p = probs->value[idx];
            if (p > kMinProb && p < 1.0) probs->grad[idx] -= g / p;
        }
    });
    return out;
}

Tensor Tape::custom(Tensor out, std::function<void()> backward) {
    push(out, std::move(backward));
    return out;
}

void Tape::backward(const Tensor& loss) {
    if (loss->size() != 1)
        throw ContractError("backward: loss must be a scalar");
    if (!loss->requires_grad)
        throw ContractError("backward: loss does not require grad");
    loss->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
        if (it->out->requires_grad) it->back();
}

void Tape::clear() { nodes_.clear(); }

GradReport finite_diff_check(const std::function<double()>& f,
                             const std::vector<Tensor>& params,
                             const std::vector<std::vector<double>>& analytic,
                             double step) {
    if (step <= 0.0) throw ContractError("finite_diff_check: step must be > 0");
    if (params.size() != analytic.size())
        throw ContractError("finite_diff_check: analytic gradient count mismatch");
    GradReport report;
    for (size_t p = 0; p < params.size(); ++p) {
        Tensor t = params[p];
        if (analytic[p].size() != t->value.size())
            throw DimensionError("finite_diff_check: analytic gradient shape mismatch");
        for (int i = 0; i < t->size(); ++i) {
            const double saved = t->value[i];
            t->value[i] = saved + step;
            const double fp = f();
            t->value[i] = saved - step;
            const double fm = f();
            t->value[i] = saved;

            GradEntry e;
            e.param = t->name.empty() ? ("param" + std::to_string(p)) : t->name;
            e.index = i;
            e.analytic = analytic[p][i];
            if (!std::isfinite(fp) || !std::isfinite(fm)) {
                e.nonfinite = true;
                report.all_finite = false;
            } else {
                e.numeric = (fp - fm) / (2.0 * step);
                const double abs_err = std::abs(e.analytic - e.numeric);
                const double denom =
                    std::max(std::abs(e.analytic) + std::abs(e.numeric), 1e-6);
                report.max_abs_error = std::max(report.max_abs_error, abs_err);
                report.max_rel_error = std::max(report.max_rel_error, abs_err / denom);
            }
            report.entries.push_back(std::move(e));
        }
    }
    return report;
}

} // namespace wdtl

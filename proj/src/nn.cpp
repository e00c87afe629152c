#include "qfusion/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qfusion::nn {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

bool grad_needed(const Tape& tape, std::initializer_list<const Tensor*> inputs) {
    if (!tape.recording()) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

// Gathers 3x3-style patches of one image [C,H,W] into col[K][P],
// K = C*kh*kw, P = OH*OW. Out-of-bounds (padding) entries are zero.
void im2col(const double* img, std::size_t C, std::size_t H, std::size_t W,
            std::size_t kh, std::size_t kw, int pad, std::size_t OH,
            std::size_t OW, double* col) {
    const std::size_t P = OH * OW;
    for (std::size_t c = 0; c < C; ++c) {
        const double* plane = img + c * H * W;
        for (std::size_t ki = 0; ki < kh; ++ki) {
            for (std::size_t kj = 0; kj < kw; ++kj) {
                double* row = col + ((c * kh + ki) * kw + kj) * P;
                for (std::size_t oh = 0; oh < OH; ++oh) {
                    const long ih = static_cast<long>(oh + ki) - pad;
                    double* out = row + oh * OW;
                    if (ih < 0 || ih >= static_cast<long>(H)) {
                        std::fill(out, out + OW, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(ih) * W;
                    for (std::size_t ow = 0; ow < OW; ++ow) {
                        const long iw = static_cast<long>(ow + kj) - pad;
                        out[ow] = (iw < 0 || iw >= static_cast<long>(W))
                                      ? 0.0
                                      : src[static_cast<std::size_t>(iw)];
                    }
                }
            }
        }
    }
}

// Scatter-add of col gradients back into one image gradient [C,H,W].
void col2im_add(const double* col, std::size_t C, std::size_t H, std::size_t W,
                std::size_t kh, std::size_t kw, int pad, std::size_t OH,
                std::size_t OW, double* img_grad) {
    const std::size_t P = OH * OW;
    for (std::size_t c = 0; c < C; ++c) {
        double* plane = img_grad + c * H * W;
        for (std::size_t ki = 0; ki < kh; ++ki) {
            for (std::size_t kj = 0; kj < kw; ++kj) {
                const double* row = col + ((c * kh + ki) * kw + kj) * P;
                for (std::size_t oh = 0; oh < OH; ++oh) {
                    const long ih = static_cast<long>(oh + ki) - pad;
                    if (ih < 0 || ih >= static_cast<long>(H)) continue;
                    double* dst = plane + static_cast<std::size_t>(ih) * W;
                    const double* src = row + oh * OW;
                    for (std::size_t ow = 0; ow < OW; ++ow) {
                        const long iw = static_cast<long>(ow + kj) - pad;
                        if (iw < 0 || iw >= static_cast<long>(W)) continue;
                        dst[static_cast<std::size_t>(iw)] += src[ow];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b,
              int padding) {
    require(x.shape().size() == 4, "conv2d: input must be [B,C,H,W], got " +
                                       shape_str(x.shape()));
    require(w.shape().size() == 4, "conv2d: weight must be [F,C,kh,kw], got " +
                                       shape_str(w.shape()));
    const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    require(w.dim(1) == C, "conv2d: channel mismatch, input has " +
                               std::to_string(C) + " channels but weight expects " +
                               std::to_string(w.dim(1)));
    require(b.shape().size() == 1 && b.dim(0) == F,
            "conv2d: bias must be [F]");
    require(H + 2 * padding + 1 > kh && W + 2 * padding + 1 > kw,
            "conv2d: kernel larger than padded input");

    const std::size_t OH = H + 2 * padding - kh + 1;
    const std::size_t OW = W + 2 * padding - kw + 1;
    const std::size_t K = C * kh * kw;
    const std::size_t P = OH * OW;

    Tensor y = Tensor::zeros({B, F, OH, OW});
    std::vector<double> col(K * P);
    const double* wd = w.data();
    const double* bd = b.data();
    for (std::size_t bi = 0; bi < B; ++bi) {
        im2col(x.data() + bi * C * H * W, C, H, W, kh, kw, padding, OH, OW,
               col.data());
        double* out = y.data() + bi * F * P;
        for (std::size_t f = 0; f < F; ++f) {
            double* orow = out + f * P;
            std::fill(orow, orow + P, bd[f]);
            const double* wrow = wd + f * K;
            for (std::size_t k = 0; k < K; ++k) {
                const double wv = wrow[k];
                if (wv == 0.0) continue;
                const double* crow = col.data() + k * P;
                for (std::size_t p = 0; p < P; ++p) orow[p] += wv * crow[p];
            }
        }
    }

    if (grad_needed(tape, {&x, &w, &b})) {
        y.set_requires_grad(true);
        Tensor xc = x, wc = w, bc = b, yc = y;
        tape.record([xc, wc, bc, yc, padding, B, C, H, W, F, kh, kw, OH, OW, K,
                     P]() mutable {
            auto gy = yc.grad();
            auto gx = xc.requires_grad() ? xc.grad() : std::span<double>();
            auto gw = wc.requires_grad() ? wc.grad() : std::span<double>();
            auto gb = bc.requires_grad() ? bc.grad() : std::span<double>();
            std::vector<double> col(K * P), dcol(K * P);
            const double* wd = wc.data();
            for (std::size_t bi = 0; bi < B; ++bi) {
                const double* gyb = gy.data() + bi * F * P;
                im2col(xc.data() + bi * C * H * W, C, H, W, kh, kw, padding, OH,
                       OW, col.data());
                if (!gb.empty()) {
                    for (std::size_t f = 0; f < F; ++f) {
                        double s = 0.0;
                        const double* grow = gyb + f * P;
                        for (std::size_t p = 0; p < P; ++p) s += grow[p];
                        gb[f] += s;
                    }
                }
                if (!gw.empty()) {
                    for (std::size_t f = 0; f < F; ++f) {
                        const double* grow = gyb + f * P;
                        double* gwrow = gw.data() + f * K;
                        for (std::size_t k = 0; k < K; ++k) {
                            const double* crow = col.data() + k * P;
                            double s = 0.0;
                            for (std::size_t p = 0; p < P; ++p)
                                s += grow[p] * crow[p];
                            gwrow[k] += s;
                        }
                    }
                }
                if (!gx.empty()) {
                    std::fill(dcol.begin(), dcol.end(), 0.0);
                    for (std::size_t f = 0; f < F; ++f) {
                        const double* grow = gyb + f * P;
                        const double* wrow = wd + f * K;
                        for (std::size_t k = 0; k < K; ++k) {
                            const double wv = wrow[k];
                            if (wv == 0.0) continue;
                            double* drow = dcol.data() + k * P;
                            for (std::size_t p = 0; p < P; ++p)
                                drow[p] += wv * grow[p];
                        }
                    }
                    col2im_add(dcol.data(), C, H, W, kh, kw, padding, OH, OW,
                               gx.data() + bi * C * H * W);
                }
            }
        });
    }
    return y;
}

Tensor batchnorm2d(Tape& tape, const Tensor& x, const Tensor& gamma,
                   const Tensor& beta, Tensor& running_mean, Tensor& running_var,
                   bool training, double momentum, double eps) {
    require(x.shape().size() == 4, "batchnorm2d: input must be [B,C,H,W]");
    const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    require(gamma.numel() == C && beta.numel() == C &&
                running_mean.numel() == C && running_var.numel() == C,
            "batchnorm2d: per-channel parameter size mismatch");
    const std::size_t plane = H * W;
    const std::size_t m = B * plane;
    if (training)
        require(m >= 2,
                "batchnorm2d: train mode needs B*H*W >= 2, variance is "
                "undefined for a single element");

    std::vector<double> mean(C), var(C);
    if (training) {
        for (std::size_t c = 0; c < C; ++c) {
            double s = 0.0;
            for (std::size_t bi = 0; bi < B; ++bi) {
                const double* p = x.data() + (bi * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) s += p[i];
            }
            const double mu = s / static_cast<double>(m);
            double sq = 0.0;
            for (std::size_t bi = 0; bi < B; ++bi) {
                const double* p = x.data() + (bi * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = p[i] - mu;
                    sq += d * d;
                }
            }
            mean[c] = mu;
            var[c] = sq / static_cast<double>(m);
            const double unbiased = sq / static_cast<double>(m - 1);
            running_mean.data()[c] =
                (1.0 - momentum) * running_mean.data()[c] + momentum * mu;
            running_var.data()[c] =
                (1.0 - momentum) * running_var.data()[c] + momentum * unbiased;
        }
    } else {
        for (std::size_t c = 0; c < C; ++c) {
            mean[c] = running_mean.data()[c];
            var[c] = running_var.data()[c];
        }
    }

    Tensor y = Tensor::zeros(x.shape());
    std::vector<double> inv_std(C);
    for (std::size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
    for (std::size_t bi = 0; bi < B; ++bi) {
        for (std::size_t c = 0; c < C; ++c) {
            const double* p = x.data() + (bi * C + c) * plane;
            double* q = y.data() + (bi * C + c) * plane;
            const double g = gamma.data()[c], bt = beta.data()[c], mu = mean[c],
                         is = inv_std[c];
            for (std::size_t i = 0; i < plane; ++i)
                q[i] = g * (p[i] - mu) * is + bt;
        }
    }

    if (grad_needed(tape, {&x, &gamma, &beta})) {
        y.set_requires_grad(true);
        Tensor xc = x, gc = gamma, bc = beta, yc = y;
        tape.record([xc, gc, bc, yc, mean, inv_std, training, B, C, plane,
                     m]() mutable {
            auto gy = yc.grad();
            auto gx = xc.requires_grad() ? xc.grad() : std::span<double>();
            auto gg = gc.requires_grad() ? gc.grad() : std::span<double>();
            auto gb = bc.requires_grad() ? bc.grad() : std::span<double>();
            for (std::size_t c = 0; c < C; ++c) {
                const double mu = mean[c], is = inv_std[c], g = gc.data()[c];
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (std::size_t bi = 0; bi < B; ++bi) {
                    const double* p = xc.data() + (bi * C + c) * plane;
                    const double* dy = gy.data() + (bi * C + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        sum_dy += dy[i];
                        sum_dy_xhat += dy[i] * (p[i] - mu) * is;
                    }
                }
                if (!gg.empty()) gg[c] += sum_dy_xhat;
                if (!gb.empty()) gb[c] += sum_dy;
                if (gx.empty()) continue;
                if (training) {
                    const double inv_m = 1.0 / static_cast<double>(m);
                    for (std::size_t bi = 0; bi < B; ++bi) {
                        const double* p = xc.data() + (bi * C + c) * plane;
                        const double* dy = gy.data() + (bi * C + c) * plane;
                        double* dx = gx.data() + (bi * C + c) * plane;
                        for (std::size_t i = 0; i < plane; ++i) {
                            const double xhat = (p[i] - mu) * is;
                            dx[i] += g * is *
                                     (dy[i] - inv_m * sum_dy -
                                      xhat * inv_m * sum_dy_xhat);
                        }
                    }
                } else {
                    for (std::size_t bi = 0; bi < B; ++bi) {
                        const double* dy = gy.data() + (bi * C + c) * plane;
                        double* dx = gx.data() + (bi * C + c) * plane;
                        for (std::size_t i = 0; i < plane; ++i)
                            dx[i] += g * is * dy[i];
                    }
                }
            }
        });
    }
    return y;
}

Tensor maxpool2d(Tape& tape, const Tensor& x) {
    require(x.shape().size() == 4, "maxpool2d: input must be [B,C,H,W]");
    const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    require(H % 2 == 0 && W % 2 == 0,
            "maxpool2d: spatial dims must be even, got " + std::to_string(H) +
                "x" + std::to_string(W));
    const std::size_t OH = H / 2, OW = W / 2;

    Tensor y = Tensor::zeros({B, C, OH, OW});
    std::vector<std::size_t> argmax(B * C * OH * OW);
    for (std::size_t bc = 0; bc < B * C; ++bc) {
        const double* p = x.data() + bc * H * W;
        double* q = y.data() + bc * OH * OW;
        std::size_t* am = argmax.data() + bc * OH * OW;
        for (std::size_t oh = 0; oh < OH; ++oh) {
            for (std::size_t ow = 0; ow < OW; ++ow) {
                // first (row-major) argmax wins on ties
                std::size_t best = (2 * oh) * W + 2 * ow;
                double best_v = p[best];
                const std::size_t cand[3] = {(2 * oh) * W + 2 * ow + 1,
                                             (2 * oh + 1) * W + 2 * ow,
                                             (2 * oh + 1) * W + 2 * ow + 1};
                for (std::size_t idx : cand) {
                    if (p[idx] > best_v) {
                        best_v = p[idx];
                        best = idx;
                    }
                }
                q[oh * OW + ow] = best_v;
                am[oh * OW + ow] = best;
            }
        }
    }

    if (grad_needed(tape, {&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape.record([xc, yc, argmax = std::move(argmax), B, C, H, W, OH,
                     OW]() mutable {
            auto gy = yc.grad();
            auto gx = xc.grad();
            for (std::size_t bc = 0; bc < B * C; ++bc) {
                const double* dy = gy.data() + bc * OH * OW;
                double* dx = gx.data() + bc * H * W;
                const std::size_t* am = argmax.data() + bc * OH * OW;
                for (std::size_t i = 0; i < OH * OW; ++i) dx[am[i]] += dy[i];
            }
        });
    }
    return y;
}

Tensor adaptive_avgpool2d(Tape& tape, const Tensor& x, std::size_t out_size) {
    require(x.shape().size() == 4, "adaptive_avgpool2d: input must be [B,C,H,W]");
    const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    require(H >= out_size && W >= out_size,
            "adaptive_avgpool2d: output size " + std::to_string(out_size) +
                " larger than input " + std::to_string(H) + "x" +
                std::to_string(W));

    auto bin_lo = [out_size](std::size_t i, std::size_t n) {
        return (i * n) / out_size;
    };
    auto bin_hi = [out_size](std::size_t i, std::size_t n) {  // exclusive
        return ((i + 1) * n + out_size - 1) / out_size;
    };

    Tensor y = Tensor::zeros({B, C, out_size, out_size});
    for (std::size_t bc = 0; bc < B * C; ++bc) {
        const double* p = x.data() + bc * H * W;
        double* q = y.data() + bc * out_size * out_size;
        for (std::size_t i = 0; i < out_size; ++i) {
            for (std::size_t j = 0; j < out_size; ++j) {
                double s = 0.0;
                const std::size_t r0 = bin_lo(i, H), r1 = bin_hi(i, H);
                const std::size_t c0 = bin_lo(j, W), c1 = bin_hi(j, W);
                for (std::size_t r = r0; r < r1; ++r)
                    for (std::size_t c = c0; c < c1; ++c) s += p[r * W + c];
                q[i * out_size + j] =
                    s / static_cast<double>((r1 - r0) * (c1 - c0));
            }
        }
    }

    if (grad_needed(tape, {&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape.record([xc, yc, B, C, H, W, out_size, bin_lo, bin_hi]() mutable {
            auto gy = yc.grad();
            auto gx = xc.grad();
            for (std::size_t bc = 0; bc < B * C; ++bc) {
                const double* dy = gy.data() + bc * out_size * out_size;
                double* dx = gx.data() + bc * H * W;
                for (std::size_t i = 0; i < out_size; ++i) {
                    for (std::size_t j = 0; j < out_size; ++j) {
                        const std::size_t r0 = bin_lo(i, H), r1 = bin_hi(i, H);
                        const std::size_t c0 = bin_lo(j, W), c1 = bin_hi(j, W);
                        const double share =
                            dy[i * out_size + j] /
                            static_cast<double>((r1 - r0) * (c1 - c0));
                        for (std::size_t r = r0; r < r1; ++r)
                            for (std::size_t c = c0; c < c1; ++c)
                                dx[r * W + c] += share;
                    }
                }
            }
        });
    }
    return y;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
    require(x.shape().size() == 2, "linear: input must be [B,N]");
    require(w.shape().size() == 2, "linear: weight must be [M,N]");
    const std::size_t B = x.dim(0), N = x.dim(1), M = w.dim(0);
    require(w.dim(1) == N, "linear: dimension mismatch, input N=" +
                               std::to_string(N) + " vs weight N=" +
                               std::to_string(w.dim(1)));
    require(b.numel() == M, "linear: bias must be [M]");

    Tensor y = Tensor::zeros({B, M});
    for (std::size_t bi = 0; bi < B; ++bi) {
        const double* xr = x.data() + bi * N;
        double* yr = y.data() + bi * M;
        for (std::size_t mi = 0; mi < M; ++mi) {
            const double* wr = w.data() + mi * N;
            double s = b.data()[mi];
            for (std::size_t n = 0; n < N; ++n) s += xr[n] * wr[n];
            yr[mi] = s;
        }
    }

    if (grad_needed(tape, {&x, &w, &b})) {
        y.set_requires_grad(true);
        Tensor xc = x, wc = w, bc = b, yc = y;
        tape.record([xc, wc, bc, yc, B, N, M]() mutable {
            auto gy = yc.grad();
            auto gx = xc.requires_grad() ? xc.grad() : std::span<double>();
            auto gw = wc.requires_grad() ? wc.grad() : std::span<double>();
            auto gb = bc.requires_grad() ? bc.grad() : std::span<double>();
            for (std::size_t bi = 0; bi < B; ++bi) {
                const double* dy = gy.data() + bi * M;
                const double* xr = xc.data() + bi * N;
                for (std::size_t mi = 0; mi < M; ++mi) {
                    const double d = dy[mi];
                    if (d == 0.0) continue;
                    if (!gw.empty()) {
                        double* gwr = gw.data() + mi * N;
                        for (std::size_t n = 0; n < N; ++n) gwr[n] += d * xr[n];
                    }
                    if (!gb.empty()) gb[mi] += d;
                    if (!gx.empty()) {
                        const double* wr = wc.data() + mi * N;
                        double* gxr = gx.data() + bi * N;
                        for (std::size_t n = 0; n < N; ++n) gxr[n] += d * wr[n];
                    }
                }
            }
        });
    }
    return y;
}

Tensor layernorm(Tape& tape, const Tensor& x, const Tensor& gamma,
                 const Tensor& beta, double eps) {
    require(x.shape().size() == 2, "layernorm: input must be [B,N]");
    const std::size_t B = x.dim(0), N = x.dim(1);
    require(gamma.numel() == N && beta.numel() == N,
            "layernorm: scale/shift must be [N]");

    Tensor y = Tensor::zeros(x.shape());
    std::vector<double> mean(B), inv_std(B);
    for (std::size_t bi = 0; bi < B; ++bi) {
        const double* xr = x.data() + bi * N;
        double mu = 0.0;
        for (std::size_t i = 0; i < N; ++i) mu += xr[i];
        mu /= static_cast<double>(N);
        double sq = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double d = xr[i] - mu;
            sq += d * d;
        }
        const double is = 1.0 / std::sqrt(sq / static_cast<double>(N) + eps);
        mean[bi] = mu;
        inv_std[bi] = is;
        double* yr = y.data() + bi * N;
        for (std::size_t i = 0; i < N; ++i)
            yr[i] = gamma.data()[i] * (xr[i] - mu) * is + beta.data()[i];
    }

    if (grad_needed(tape, {&x, &gamma, &beta})) {
        y.set_requires_grad(true);
        Tensor xc = x, gc = gamma, bc = beta, yc = y;
        tape.record([xc, gc, bc, yc, mean, inv_std, B, N]() mutable {
            auto gy = yc.grad();
            auto gx = xc.requires_grad() ? xc.grad() : std::span<double>();
            auto gg = gc.requires_grad() ? gc.grad() : std::span<double>();
            auto gb = bc.requires_grad() ? bc.grad() : std::span<double>();
            for (std::size_t bi = 0; bi < B; ++bi) {
                const double* xr = xc.data() + bi * N;
                const double* dy = gy.data() + bi * N;
                const double mu = mean[bi], is = inv_std[bi];
                double sum_gdy = 0.0, sum_gdy_xhat = 0.0;
                for (std::size_t i = 0; i < N; ++i) {
                    const double xhat = (xr[i] - mu) * is;
                    const double gdy = gc.data()[i] * dy[i];
                    sum_gdy += gdy;
                    sum_gdy_xhat += gdy * xhat;
                    if (!gg.empty()) gg[i] += dy[i] * xhat;
                    if (!gb.empty()) gb[i] += dy[i];
                }
                if (gx.empty()) continue;
                double* dx = gx.data() + bi * N;
                const double inv_n = 1.0 / static_cast<double>(N);
                for (std::size_t i = 0; i < N; ++i) {
                    const double xhat = (xr[i] - mu) * is;
                    dx[i] += is * (gc.data()[i] * dy[i] - inv_n * sum_gdy -
                                   xhat * inv_n * sum_gdy_xhat);
                }
            }
        });
    }
    return y;
}

Tensor relu(Tape& tape, const Tensor& x) {
    Tensor y = Tensor::zeros(x.shape());
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i)
        y.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    if (grad_needed(tape, {&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape.record([xc, yc, n]() mutable {
            auto gy = yc.grad();
            auto gx = xc.grad();
            for (std::size_t i = 0; i < n; ++i)
                if (xc.data()[i] > 0.0) gx[i] += gy[i];
        });
    }
    return y;
}

Tensor tanh_act(Tape& tape, const Tensor& x) {
    Tensor y = Tensor::zeros(x.shape());
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) y.data()[i] = std::tanh(x.data()[i]);
    if (grad_needed(tape, {&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape.record([xc, yc, n]() mutable {
            auto gy = yc.grad();
            auto gx = xc.grad();
            for (std::size_t i = 0; i < n; ++i) {
                const double t = yc.data()[i];
                gx[i] += gy[i] * (1.0 - t * t);
            }
        });
    }
    return y;
}

Tensor dropout(Tape& tape, const Tensor& x, double rate, bool training,
               Xoshiro256& rng) {
    require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
    if (!training || rate == 0.0) return x;

    const std::size_t n = x.numel();
    const double scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(n);
    for (std::size_t i = 0; i < n; ++i)
        mask[i] = rng.uniform() < rate ? 0.0 : scale;

    Tensor y = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < n; ++i) y.data()[i] = x.data()[i] * mask[i];

    if (grad_needed(tape, {&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape.record([xc, yc, mask = std::move(mask), n]() mutable {
            auto gy = yc.grad();
            auto gx = xc.grad();
            for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * mask[i];
        });
    }
    return y;
}

Tensor softmax(Tape& tape, const Tensor& x) {
    require(x.shape().size() == 2, "softmax: input must be [B,N]");
    const std::size_t B = x.dim(0), N = x.dim(1);
    Tensor y = Tensor::zeros(x.shape());
    for (std::size_t bi = 0; bi < B; ++bi) {
        const double* xr = x.data() + bi * N;
        double* yr = y.data() + bi * N;
        const double mx = *std::max_element(xr, xr + N);
        double z = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            yr[i] = std::exp(xr[i] - mx);
            z += yr[i];
        }
        for (std::size_t i = 0; i < N; ++i) yr[i] /= z;
    }
    if (grad_needed(tape, {&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape.record([xc, yc, B, N]() mutable {
            auto gy = yc.grad();
            auto gx = xc.grad();
            for (std::size_t bi = 0; bi < B; ++bi) {
                const double* p = yc.data() + bi * N;
                const double* dy = gy.data() + bi * N;
                double dot = 0.0;
                for (std::size_t i = 0; i < N; ++i) dot += p[i] * dy[i];
                double* dx = gx.data() + bi * N;
                for (std::size_t i = 0; i < N; ++i)
                    dx[i] += p[i] * (dy[i] - dot);
            }
        });
    }
    return y;
}

Tensor cross_entropy_smoothed(Tape& tape, const Tensor& logits,
                              const std::vector<int>& labels, double epsilon) {
    require(logits.shape().size() == 2, "cross_entropy: logits must be [B,K]");
    require(epsilon >= 0.0 && epsilon < 1.0,
            "cross_entropy: smoothing factor must be in [0,1)");
    const std::size_t B = logits.dim(0), K = logits.dim(1);
    require(labels.size() == B, "cross_entropy: labels/batch size mismatch");
    for (int l : labels)
        require(l >= 0 && static_cast<std::size_t>(l) < K,
                "cross_entropy: label " + std::to_string(l) +
                    " outside class range [0," + std::to_string(K) + ")");

    const double off = epsilon / static_cast<double>(K);
    const double on = 1.0 - epsilon + off;

    // log-softmax with max subtraction; probs kept for the backward pass
    std::vector<double> probs(B * K);
    double loss = 0.0;
    for (std::size_t bi = 0; bi < B; ++bi) {
        const double* xr = logits.data() + bi * K;
        const double mx = *std::max_element(xr, xr + K);
        double z = 0.0;
        for (std::size_t i = 0; i < K; ++i) z += std::exp(xr[i] - mx);
        const double log_z = std::log(z) + mx;
        for (std::size_t i = 0; i < K; ++i) {
            const double logp = xr[i] - log_z;
            probs[bi * K + i] = std::exp(logp);
            const double target =
                (static_cast<std::size_t>(labels[bi]) == i) ? on : off;
            loss -= target * logp;
        }
    }
    loss /= static_cast<double>(B);

    Tensor out = Tensor::scalar(loss);
    if (grad_needed(tape, {&logits})) {
        out.set_requires_grad(true);
        Tensor lc = logits, oc = out;
        tape.record([lc, oc, labels, probs = std::move(probs), on, off, B,
                     K]() mutable {
            const double g = oc.grad()[0] / static_cast<double>(B);
            auto gx = lc.grad();
            for (std::size_t bi = 0; bi < B; ++bi) {
                for (std::size_t i = 0; i < K; ++i) {
                    const double target =
                        (static_cast<std::size_t>(labels[bi]) == i) ? on : off;
                    gx[bi * K + i] += g * (probs[bi * K + i] - target);
                }
            }
        });
    }
    return out;
}

Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b) {
    require(a.shape().size() == 2 && b.shape().size() == 2,
            "concat_cols: inputs must be [B,N]");
    require(a.dim(0) == b.dim(0), "concat_cols: batch size mismatch");
    const std::size_t B = a.dim(0), Na = a.dim(1), Nb = b.dim(1);
    Tensor y = Tensor::zeros({B, Na + Nb});
    for (std::size_t bi = 0; bi < B; ++bi) {
        double* yr = y.data() + bi * (Na + Nb);
        std::copy_n(a.data() + bi * Na, Na, yr);
        std::copy_n(b.data() + bi * Nb, Nb, yr + Na);
    }
    if (grad_needed(tape, {&a, &b})) {
        y.set_requires_grad(true);
        Tensor ac = a, bc = b, yc = y;
        tape.record([ac, bc, yc, B, Na, Nb]() mutable {
            auto gy = yc.grad();
            auto ga = ac.requires_grad() ? ac.grad() : std::span<double>();
            auto gb = bc.requires_grad() ? bc.grad() : std::span<double>();
            for (std::size_t bi = 0; bi < B; ++bi) {
                const double* dy = gy.data() + bi * (Na + Nb);
                if (!ga.empty())
                    for (std::size_t i = 0; i < Na; ++i)
                        ga[bi * Na + i] += dy[i];
                if (!gb.empty())
                    for (std::size_t i = 0; i < Nb; ++i)
                        gb[bi * Nb + i] += dy[Na + i];
            }
        });
    }
    return y;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape new_shape) {
    require(shape_numel(new_shape) == x.numel(),
            "reshape: element count mismatch, " + shape_str(x.shape()) +
                " -> " + shape_str(new_shape));
    Tensor y = Tensor::from_data(std::move(new_shape),
                                 {x.data(), x.data() + x.numel()});
    if (grad_needed(tape, {&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape.record([xc, yc]() mutable {
            xc.accumulate_grad(yc.grad());
        });
    }
    return y;
}

}  // namespace qfusion::nn

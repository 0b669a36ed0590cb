#include "safepatch/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace safepatch {
namespace ops {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b))
        throw InvalidShapeError(std::string(where) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

inline double sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    const size_t n = static_cast<size_t>(a.numel());
    std::vector<double> out(n);
    const double* pa = a.data();
    const double* pb = b.data();
    for (size_t i = 0; i < n; ++i) out[i] = pa[i] + pb[i];
    Tensor r = Tensor::from_data(a.shape(), std::move(out));
    check_finite(r, "add");
    if (Tape* tp = Tape::active()) {
        const int32_t na = tp->node_of(a), nb = tp->node_of(b);
        if (na >= 0 || nb >= 0) {
            tp->record(r, [na, nb, n](std::span<const double> g, Tape& t) {
                if (na >= 0) {
                    auto& ga = t.grad_buf(na, n);
                    for (size_t i = 0; i < n; ++i) ga[i] += g[i];
                }
                if (nb >= 0) {
                    auto& gb = t.grad_buf(nb, n);
                    for (size_t i = 0; i < n; ++i) gb[i] += g[i];
                }
            });
        }
    }
    return r;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    const size_t n = static_cast<size_t>(a.numel());
    std::vector<double> out(n);
    const double* pa = a.data();
    const double* pb = b.data();
    for (size_t i = 0; i < n; ++i) out[i] = pa[i] - pb[i];
    Tensor r = Tensor::from_data(a.shape(), std::move(out));
    check_finite(r, "sub");
    if (Tape* tp = Tape::active()) {
        const int32_t na = tp->node_of(a), nb = tp->node_of(b);
        if (na >= 0 || nb >= 0) {
            tp->record(r, [na, nb, n](std::span<const double> g, Tape& t) {
                if (na >= 0) {
                    auto& ga = t.grad_buf(na, n);
                    for (size_t i = 0; i < n; ++i) ga[i] += g[i];
                }
                if (nb >= 0) {
                    auto& gb = t.grad_buf(nb, n);
                    for (size_t i = 0; i < n; ++i) gb[i] -= g[i];
                }
            });
        }
    }
    return r;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    const size_t n = static_cast<size_t>(a.numel());
    std::vector<double> out(n);
    const double* pa = a.data();
    const double* pb = b.data();
    for (size_t i = 0; i < n; ++i) out[i] = pa[i] * pb[i];
    Tensor r = Tensor::from_data(a.shape(), std::move(out));
    check_finite(r, "mul");
    if (Tape* tp = Tape::active()) {
        const int32_t na = tp->node_of(a), nb = tp->node_of(b);
        if (na >= 0 || nb >= 0) {
            auto sa = a.storage();
            auto sb = b.storage();
            tp->record(r, [na, nb, n, sa, sb](std::span<const double> g, Tape& t) {
                if (na >= 0) {
                    auto& ga = t.grad_buf(na, n);
                    for (size_t i = 0; i < n; ++i) ga[i] += g[i] * sb->data[i];
                }
                if (nb >= 0) {
                    auto& gb = t.grad_buf(nb, n);
                    for (size_t i = 0; i < n; ++i) gb[i] += g[i] * sa->data[i];
                }
            });
        }
    }
    return r;
}

Tensor scale(const Tensor& a, double s) {
    const size_t n = static_cast<size_t>(a.numel());
    std::vector<double> out(n);
    const double* pa = a.data();
    for (size_t i = 0; i < n; ++i) out[i] = pa[i] * s;
    Tensor r = Tensor::from_data(a.shape(), std::move(out));
    check_finite(r, "scale");
    if (Tape* tp = Tape::active()) {
        const int32_t na = tp->node_of(a);
        if (na >= 0) {
            tp->record(r, [na, n, s](std::span<const double> g, Tape& t) {
                auto& ga = t.grad_buf(na, n);
                for (size_t i = 0; i < n; ++i) ga[i] += g[i] * s;
            });
        }
    }
    return r;
}

Tensor silu(const Tensor& a) {
    const size_t n = static_cast<size_t>(a.numel());
    std::vector<double> out(n);
    const double* pa = a.data();
    for (size_t i = 0; i < n; ++i) out[i] = pa[i] * sigmoid(pa[i]);
    Tensor r = Tensor::from_data(a.shape(), std::move(out));
    check_finite(r, "silu");
    if (Tape* tp = Tape::active()) {
        const int32_t na = tp->node_of(a);
        if (na >= 0) {
            auto sa = a.storage();
            tp->record(r, [na, n, sa](std::span<const double> g, Tape& t) {
                auto& ga = t.grad_buf(na, n);
                for (size_t i = 0; i < n; ++i) {
                    const double x = sa->data[i];
                    const double s = sigmoid(x);
                    ga[i] += g[i] * (s * (1.0 + x * (1.0 - s)));
                }
            });
        }
    }
    return r;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw InvalidShapeError("matmul: expects rank-2 tensors, got " + shape_str(a.shape()) +
                                " and " + shape_str(b.shape()));
    const int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw InvalidShapeError("matmul: inner extents differ, " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
    std::vector<double> out(static_cast<size_t>(m * n), 0.0);
    const double* pa = a.data();
    const double* pb = b.data();
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t kk = 0; kk < k; ++kk) {
            const double av = pa[i * k + kk];
            const double* brow = pb + kk * n;
            double* orow = out.data() + i * n;
            for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    Tensor r = Tensor::from_data({m, n}, std::move(out));
    check_finite(r, "matmul");
    if (Tape* tp = Tape::active()) {
        const int32_t na = tp->node_of(a), nb = tp->node_of(b);
        if (na >= 0 || nb >= 0) {
            auto sa = a.storage();
            auto sb = b.storage();
            tp->record(r, [na, nb, m, k, n, sa, sb](std::span<const double> g, Tape& t) {
                if (na >= 0) {
                    auto& ga = t.grad_buf(na, static_cast<size_t>(m * k));
                    for (int64_t i = 0; i < m; ++i)
                        for (int64_t j = 0; j < n; ++j) {
                            const double gv = g[static_cast<size_t>(i * n + j)];
                            const double* brow = sb->data.data() + j;
                            for (int64_t kk = 0; kk < k; ++kk)
                                ga[static_cast<size_t>(i * k + kk)] += gv * brow[kk * n];
                        }
                }
                if (nb >= 0) {
                    auto& gb = t.grad_buf(nb, static_cast<size_t>(k * n));
                    for (int64_t i = 0; i < m; ++i)
                        for (int64_t kk = 0; kk < k; ++kk) {
                            const double av = sa->data[static_cast<size_t>(i * k + kk)];
                            const double* grow = g.data() + i * n;
                            double* gbrow = gb.data() + kk * n;
                            for (int64_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                        }
                }
            });
        }
    }
    return r;
}

Tensor transpose(const Tensor& x) {
    if (x.rank() != 2)
        throw InvalidShapeError("transpose: expects rank-2, got " + shape_str(x.shape()));
    const int64_t m = x.dim(0), n = x.dim(1);
    std::vector<double> out(static_cast<size_t>(m * n));
    const double* px = x.data();
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out[static_cast<size_t>(j * m + i)] = px[i * n + j];
    Tensor r = Tensor::from_data({n, m}, std::move(out));
    if (Tape* tp = Tape::active()) {
        const int32_t nx = tp->node_of(x);
        if (nx >= 0) {
            tp->record(r, [nx, m, n](std::span<const double> g, Tape& t) {
                auto& gx = t.grad_buf(nx, static_cast<size_t>(m * n));
                for (int64_t j = 0; j < n; ++j)
                    for (int64_t i = 0; i < m; ++i)
                        gx[static_cast<size_t>(i * n + j)] += g[static_cast<size_t>(j * m + i)];
            });
        }
    }
    return r;
}

Tensor softmax(const Tensor& x) {
    if (x.rank() != 2)
        throw InvalidShapeError("softmax: expects rank-2, got " + shape_str(x.shape()));
    const int64_t rows = x.dim(0), cols = x.dim(1);
    std::vector<double> out(static_cast<size_t>(rows * cols));
    const double* px = x.data();
    for (int64_t i = 0; i < rows; ++i) {
        const double* row = px + i * cols;
        double mx = row[0];
        for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        double* orow = out.data() + i * cols;
        for (int64_t j = 0; j < cols; ++j) {
            orow[j] = std::exp(row[j] - mx);
            s += orow[j];
        }
        const double inv = 1.0 / s;
        for (int64_t j = 0; j < cols; ++j) orow[j] *= inv;
    }
    Tensor r = Tensor::from_data(x.shape(), std::move(out));
    check_finite(r, "softmax");
    if (Tape* tp = Tape::active()) {
        const int32_t nx = tp->node_of(x);
        if (nx >= 0) {
            auto sr = r.storage();
            tp->record(r, [nx, rows, cols, sr](std::span<const double> g, Tape& t) {
                auto& gx = t.grad_buf(nx, static_cast<size_t>(rows * cols));
                for (int64_t i = 0; i < rows; ++i) {
                    const double* y = sr->data.data() + i * cols;
                    const double* gr = g.data() + i * cols;
                    double dot = 0.0;
                    for (int64_t j = 0; j < cols; ++j) dot += gr[j] * y[j];
                    double* go = gx.data() + i * cols;
                    for (int64_t j = 0; j < cols; ++j) go[j] += y[j] * (gr[j] - dot);
                }
            });
        }
    }
    return r;
}

Tensor mse(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mse");
    const size_t n = static_cast<size_t>(a.numel());
    const double* pa = a.data();
    const double* pb = b.data();
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = pa[i] - pb[i];
        acc += d * d;
    }
    Tensor r = Tensor::scalar(acc / static_cast<double>(n));
    check_finite(r, "mse");
    if (Tape* tp = Tape::active()) {
        const int32_t na = tp->node_of(a), nb = tp->node_of(b);
        if (na >= 0 || nb >= 0) {
            auto sa = a.storage();
            auto sb = b.storage();
            tp->record(r, [na, nb, n, sa, sb](std::span<const double> g, Tape& t) {
                const double c = g[0] * 2.0 / static_cast<double>(n);
                if (na >= 0) {
                    auto& ga = t.grad_buf(na, n);
                    for (size_t i = 0; i < n; ++i) ga[i] += c * (sa->data[i] - sb->data[i]);
                }
                if (nb >= 0) {
                    auto& gb = t.grad_buf(nb, n);
                    for (size_t i = 0; i < n; ++i) gb[i] -= c * (sa->data[i] - sb->data[i]);
                }
            });
        }
    }
    return r;
}

Tensor sum(const Tensor& x) {
    const size_t n = static_cast<size_t>(x.numel());
    const double* px = x.data();
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += px[i];
    Tensor r = Tensor::scalar(acc);
    check_finite(r, "sum");
    if (Tape* tp = Tape::active()) {
        const int32_t nx = tp->node_of(x);
        if (nx >= 0) {
            tp->record(r, [nx, n](std::span<const double> g, Tape& t) {
                auto& gx = t.grad_buf(nx, n);
                for (size_t i = 0; i < n; ++i) gx[i] += g[0];
            });
        }
    }
    return r;
}

namespace {

struct ConvDims {
    int64_t cin, h, w, cout, kh, kw, oh, ow;
    int stride, padding;
};

ConvDims conv_dims(const Tensor& x, const Tensor& kernel, int stride, int padding) {
    if (x.rank() != 3 || kernel.rank() != 4)
        throw InvalidShapeError("conv2d: expects x [C,H,W] and kernel [Co,Ci,kh,kw], got " +
                                shape_str(x.shape()) + " and " + shape_str(kernel.shape()));
    if (stride < 1 || padding < 0)
        throw InvalidShapeError("conv2d: bad stride/padding");
    ConvDims d;
    d.cin = x.dim(0);
    d.h = x.dim(1);
    d.w = x.dim(2);
    d.cout = kernel.dim(0);
    d.kh = kernel.dim(2);
    d.kw = kernel.dim(3);
    d.stride = stride;
    d.padding = padding;
    if (kernel.dim(1) != d.cin)
        throw InvalidShapeError("conv2d: kernel in-channels " + std::to_string(kernel.dim(1)) +
                                " vs input channels " + std::to_string(d.cin));
    if (d.kh > d.h + 2 * padding || d.kw > d.w + 2 * padding)
        throw InvalidShapeError("conv2d: kernel larger than padded input");
    d.oh = (d.h + 2 * padding - d.kh) / stride + 1;
    d.ow = (d.w + 2 * padding - d.kw) / stride + 1;
    return d;
}

} // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              int stride, int padding) {
    const ConvDims d = conv_dims(x, kernel, stride, padding);
    const bool has_bias = bias.defined();
    if (has_bias && (bias.rank() != 1 || bias.dim(0) != d.cout))
        throw InvalidShapeError("conv2d: bias must be [C_out]");

    std::vector<double> out(static_cast<size_t>(d.cout * d.oh * d.ow), 0.0);
    const double* px = x.data();
    const double* pk = kernel.data();
    if (has_bias) {
        const double* pb = bias.data();
        for (int64_t co = 0; co < d.cout; ++co)
            std::fill_n(out.data() + co * d.oh * d.ow, d.oh * d.ow, pb[co]);
    }
    for (int64_t co = 0; co < d.cout; ++co) {
        double* oplane = out.data() + co * d.oh * d.ow;
        for (int64_t ci = 0; ci < d.cin; ++ci) {
            const double* xplane = px + ci * d.h * d.w;
            const double* krow = pk + (co * d.cin + ci) * d.kh * d.kw;
            for (int64_t u = 0; u < d.kh; ++u) {
                for (int64_t v = 0; v < d.kw; ++v) {
                    const double kv = krow[u * d.kw + v];
                    for (int64_t oy = 0; oy < d.oh; ++oy) {
                        const int64_t iy = oy * d.stride - d.padding + u;
                        if (iy < 0 || iy >= d.h) continue;
                        const double* xrow = xplane + iy * d.w;
                        double* orow = oplane + oy * d.ow;
                        for (int64_t ox = 0; ox < d.ow; ++ox) {
                            const int64_t ix = ox * d.stride - d.padding + v;
                            if (ix < 0 || ix >= d.w) continue;
                            orow[ox] += kv * xrow[ix];
                        }
                    }
                }
            }
        }
    }
    Tensor r = Tensor::from_data({d.cout, d.oh, d.ow}, std::move(out));
    check_finite(r, "conv2d");

    if (Tape* tp = Tape::active()) {
        const int32_t nx = tp->node_of(x);
        const int32_t nk = tp->node_of(kernel);
        const int32_t nb = has_bias ? tp->node_of(bias) : -1;
        if (nx >= 0 || nk >= 0 || nb >= 0) {
            auto sx = x.storage();
            auto sk = kernel.storage();
            tp->record(r, [nx, nk, nb, d, sx, sk](std::span<const double> g, Tape& t) {
                if (nb >= 0) {
                    auto& gb = t.grad_buf(nb, static_cast<size_t>(d.cout));
                    for (int64_t co = 0; co < d.cout; ++co) {
                        const double* gp = g.data() + co * d.oh * d.ow;
                        double acc = 0.0;
                        for (int64_t i = 0; i < d.oh * d.ow; ++i) acc += gp[i];
                        gb[static_cast<size_t>(co)] += acc;
                    }
                }
                std::vector<double>* gx = nx >= 0 ? &t.grad_buf(nx, sx->data.size()) : nullptr;
                std::vector<double>* gk = nk >= 0 ? &t.grad_buf(nk, sk->data.size()) : nullptr;
                if (!gx && !gk) return;
                for (int64_t co = 0; co < d.cout; ++co) {
                    const double* gplane = g.data() + co * d.oh * d.ow;
                    for (int64_t ci = 0; ci < d.cin; ++ci) {
                        const double* xplane = sx->data.data() + ci * d.h * d.w;
                        const double* krow = sk->data.data() + (co * d.cin + ci) * d.kh * d.kw;
                        double* gxplane = gx ? gx->data() + ci * d.h * d.w : nullptr;
                        double* gkrow = gk ? gk->data() + (co * d.cin + ci) * d.kh * d.kw : nullptr;
                        for (int64_t u = 0; u < d.kh; ++u) {
                            for (int64_t v = 0; v < d.kw; ++v) {
                                const double kv = krow[u * d.kw + v];
                                double gkacc = 0.0;
                                for (int64_t oy = 0; oy < d.oh; ++oy) {
                                    const int64_t iy = oy * d.stride - d.padding + u;
                                    if (iy < 0 || iy >= d.h) continue;
                                    const double* xrow = xplane + iy * d.w;
                                    const double* grow = gplane + oy * d.ow;
                                    double* gxrow = gxplane ? gxplane + iy * d.w : nullptr;
                                    for (int64_t ox = 0; ox < d.ow; ++ox) {
                                        const int64_t ix = ox * d.stride - d.padding + v;
                                        if (ix < 0 || ix >= d.w) continue;
                                        const double gv = grow[ox];
                                        if (gxrow) gxrow[ix] += kv * gv;
                                        if (gkrow) gkacc += xrow[ix] * gv;
                                    }
                                }
                                if (gkrow) gkrow[u * d.kw + v] += gkacc;
                            }
                        }
                    }
                }
            });
        }
    }
    return r;
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, int stride, int padding) {
    return conv2d(x, kernel, Tensor(), stride, padding);
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
    if (table.rank() != 2)
        throw InvalidShapeError("gather_rows: table must be rank-2");
    if (ids.empty())
        throw InvalidShapeError("gather_rows: empty id list");
    const int64_t rows = table.dim(0), d = table.dim(1);
    for (int id : ids)
        if (id < 0 || id >= rows)
            throw InvalidTokenError("gather_rows: id " + std::to_string(id) + " out of range [0," +
                                    std::to_string(rows) + ")");
    std::vector<double> out(ids.size() * static_cast<size_t>(d));
    const double* pt = table.data();
    for (size_t i = 0; i < ids.size(); ++i)
        std::memcpy(out.data() + i * d, pt + static_cast<int64_t>(ids[i]) * d,
                    static_cast<size_t>(d) * sizeof(double));
    Tensor r = Tensor::from_data({static_cast<int64_t>(ids.size()), d}, std::move(out));
    if (Tape* tp = Tape::active()) {
        const int32_t nt = tp->node_of(table);
        if (nt >= 0) {
            auto st = table.storage();
            tp->record(r, [nt, ids, d, st](std::span<const double> g, Tape& t) {
                auto& gt = t.grad_buf(nt, st->data.size());
                for (size_t i = 0; i < ids.size(); ++i) {
                    double* row = gt.data() + static_cast<int64_t>(ids[i]) * d;
                    const double* gr = g.data() + i * d;
                    for (int64_t j = 0; j < d; ++j) row[j] += gr[j];
                }
            });
        }
    }
    return r;
}

Tensor reshape(const Tensor& x, const Shape& shape) {
    check_valid_shape(shape, "reshape");
    if (shape_numel(shape) != x.numel())
        throw InvalidShapeError("reshape: numel mismatch " + shape_str(x.shape()) + " -> " +
                                shape_str(shape));
    std::vector<double> out(x.data(), x.data() + x.numel());
    Tensor r = Tensor::from_data(shape, std::move(out));
    if (Tape* tp = Tape::active()) {
        const int32_t nx = tp->node_of(x);
        if (nx >= 0) {
            const size_t n = static_cast<size_t>(x.numel());
            tp->record(r, [nx, n](std::span<const double> g, Tape& t) {
                auto& gx = t.grad_buf(nx, n);
                for (size_t i = 0; i < n; ++i) gx[i] += g[i];
            });
        }
    }
    return r;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw InvalidShapeError("concat_channels: incompatible " + shape_str(a.shape()) + " and " +
                                shape_str(b.shape()));
    const size_t na = static_cast<size_t>(a.numel());
    const size_t nb = static_cast<size_t>(b.numel());
    std::vector<double> out(na + nb);
    std::memcpy(out.data(), a.data(), na * sizeof(double));
    std::memcpy(out.data() + na, b.data(), nb * sizeof(double));
    Tensor r = Tensor::from_data({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)}, std::move(out));
    if (Tape* tp = Tape::active()) {
        const int32_t ia = tp->node_of(a), ib = tp->node_of(b);
        if (ia >= 0 || ib >= 0) {
            tp->record(r, [ia, ib, na, nb](std::span<const double> g, Tape& t) {
                if (ia >= 0) {
                    auto& ga = t.grad_buf(ia, na);
                    for (size_t i = 0; i < na; ++i) ga[i] += g[i];
                }
                if (ib >= 0) {
                    auto& gb = t.grad_buf(ib, nb);
                    for (size_t i = 0; i < nb; ++i) gb[i] += g[na + i];
                }
            });
        }
    }
    return r;
}

Tensor upsample_nearest2(const Tensor& x) {
    if (x.rank() != 3)
        throw InvalidShapeError("upsample_nearest2: expects [C,H,W]");
    const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    std::vector<double> out(static_cast<size_t>(c * 4 * h * w));
    const double* px = x.data();
    const int64_t oh = 2 * h, ow = 2 * w;
    for (int64_t ci = 0; ci < c; ++ci)
        for (int64_t y = 0; y < h; ++y)
            for (int64_t xx = 0; xx < w; ++xx) {
                const double v = px[(ci * h + y) * w + xx];
                double* o = out.data() + (ci * oh + 2 * y) * ow + 2 * xx;
                o[0] = v;
                o[1] = v;
                o[ow] = v;
                o[ow + 1] = v;
            }
    Tensor r = Tensor::from_data({c, oh, ow}, std::move(out));
    if (Tape* tp = Tape::active()) {
        const int32_t nx = tp->node_of(x);
        if (nx >= 0) {
            tp->record(r, [nx, c, h, w, oh, ow](std::span<const double> g, Tape& t) {
                auto& gx = t.grad_buf(nx, static_cast<size_t>(c * h * w));
                for (int64_t ci = 0; ci < c; ++ci)
                    for (int64_t y = 0; y < h; ++y)
                        for (int64_t xx = 0; xx < w; ++xx) {
                            const double* gp = g.data() + (ci * oh + 2 * y) * ow + 2 * xx;
                            gx[(ci * h + y) * w + xx] += gp[0] + gp[1] + gp[ow] + gp[ow + 1];
                        }
            });
        }
    }
    return r;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
    if (x.rank() != 3 || bias.rank() != 1 || bias.dim(0) != x.dim(0))
        throw InvalidShapeError("add_channel_bias: x " + shape_str(x.shape()) + " bias " +
                                shape_str(bias.shape()));
    const int64_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
    std::vector<double> out(static_cast<size_t>(c * plane));
    const double* px = x.data();
    const double* pb = bias.data();
    for (int64_t ci = 0; ci < c; ++ci) {
        const double bv = pb[ci];
        for (int64_t i = 0; i < plane; ++i) out[ci * plane + i] = px[ci * plane + i] + bv;
    }
    Tensor r = Tensor::from_data(x.shape(), std::move(out));
    check_finite(r, "add_channel_bias");
    if (Tape* tp = Tape::active()) {
        const int32_t nx = tp->node_of(x), nb = tp->node_of(bias);
        if (nx >= 0 || nb >= 0) {
            tp->record(r, [nx, nb, c, plane](std::span<const double> g, Tape& t) {
                if (nx >= 0) {
                    auto& gx = t.grad_buf(nx, static_cast<size_t>(c * plane));
                    for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
                }
                if (nb >= 0) {
                    auto& gb = t.grad_buf(nb, static_cast<size_t>(c));
                    for (int64_t ci = 0; ci < c; ++ci) {
                        double acc = 0.0;
                        for (int64_t i = 0; i < plane; ++i) acc += g[ci * plane + i];
                        gb[static_cast<size_t>(ci)] += acc;
                    }
                }
            });
        }
    }
    return r;
}

} // namespace ops
} // namespace safepatch

#include "ketlab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ketlab {

namespace {

void check_same_shape(const char *op, const Tensor &a, const Tensor &b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                    shape_string(b.shape()));
}

std::int64_t last_dim(const Tensor &t) { return t.shape().back(); }

bool maybe_record(bool requires_grad, std::function<void()> fn) {
    if (!detail::tracing(requires_grad)) return false;
    Graph::active()->record(std::move(fn));
    return true;
}

constexpr double kGeluC = 0.7978845608028653558798921198687;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Tensor add(const Tensor &a, const Tensor &b) {
    check_same_shape("add", a, b);
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor out(a.shape(), rg);
    const std::int64_t n = a.numel();
    const double *pa = a.data(), *pb = b.data();
    double *po = out.data();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    maybe_record(rg, [a, b, out]() mutable {
        const double *g = out.grad();
        const std::int64_t n = out.numel();
        if (a.requires_grad()) {
            double *ga = a.grad();
            for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i];
        }
        if (b.requires_grad()) {
            double *gb = b.grad();
            for (std::int64_t i = 0; i < n; ++i) gb[i] += g[i];
        }
    });
    return out;
}

Tensor sub(const Tensor &a, const Tensor &b) {
    check_same_shape("sub", a, b);
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor out(a.shape(), rg);
    const std::int64_t n = a.numel();
    const double *pa = a.data(), *pb = b.data();
    double *po = out.data();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
    maybe_record(rg, [a, b, out]() mutable {
        const double *g = out.grad();
        const std::int64_t n = out.numel();
        if (a.requires_grad()) {
            double *ga = a.grad();
            for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i];
        }
        if (b.requires_grad()) {
            double *gb = b.grad();
            for (std::int64_t i = 0; i < n; ++i) gb[i] -= g[i];
        }
    });
    return out;
}

Tensor mul(const Tensor &a, const Tensor &b) {
    check_same_shape("mul", a, b);
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor out(a.shape(), rg);
    const std::int64_t n = a.numel();
    const double *pa = a.data(), *pb = b.data();
    double *po = out.data();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    maybe_record(rg, [a, b, out]() mutable {
        const double *g = out.grad();
        const std::int64_t n = out.numel();
        if (a.requires_grad()) {
            double *ga = a.grad();
            const double *pb = b.data();
            for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i] * pb[i];
        }
        if (b.requires_grad()) {
            double *gb = b.grad();
            const double *pa = a.data();
            for (std::int64_t i = 0; i < n; ++i) gb[i] += g[i] * pa[i];
        }
    });
    return out;
}

Tensor scale(const Tensor &a, double c) {
    const bool rg = a.requires_grad();
    Tensor out(a.shape(), rg);
    const std::int64_t n = a.numel();
    const double *pa = a.data();
    double *po = out.data();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] * c;
    maybe_record(rg, [a, out, c]() mutable {
        const double *g = out.grad();
        double *ga = a.grad();
        const std::int64_t n = out.numel();
        for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i] * c;
    });
    return out;
}

Tensor add_row_vector(const Tensor &x, const Tensor &bias) {
    if (x.shape().size() != 2 || bias.numel() != x.cols())
        throw std::invalid_argument("add_row_vector: " + shape_string(x.shape()) + " vs " + shape_string(bias.shape()));
    const bool rg = x.requires_grad() || bias.requires_grad();
    Tensor out(x.shape(), rg);
    const std::int64_t r = x.rows(), c = x.cols();
    const double *px = x.data(), *pb = bias.data();
    double *po = out.data();
    for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < c; ++j) po[i * c + j] = px[i * c + j] + pb[j];
    maybe_record(rg, [x, bias, out]() mutable {
        const double *g = out.grad();
        const std::int64_t r = out.rows(), c = out.cols();
        if (x.requires_grad()) {
            double *gx = x.grad();
            for (std::int64_t i = 0; i < r * c; ++i) gx[i] += g[i];
        }
        if (bias.requires_grad()) {
            double *gb = bias.grad();
            for (std::int64_t i = 0; i < r; ++i)
                for (std::int64_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
        }
    });
    return out;
}

Tensor matmul(const Tensor &a, const Tensor &b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows())
        throw std::invalid_argument("matmul: shape mismatch " + shape_string(a.shape()) + " vs " +
                                    shape_string(b.shape()));
    const std::int64_t m = a.rows(), k = a.cols(), n = b.cols();
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor out(Shape{m, n}, rg);
    const double *pa = a.data(), *pb = b.data();
    double *po = out.data();
    for (std::int64_t i = 0; i < m; ++i) {
        double *orow = po + i * n;
        for (std::int64_t kk = 0; kk < k; ++kk) {
            const double av = pa[i * k + kk];
            const double *brow = pb + kk * n;
            for (std::int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    maybe_record(rg, [a, b, out]() mutable {
        const std::int64_t m = a.rows(), k = a.cols(), n = b.cols();
        const double *g = out.grad();
        if (a.requires_grad()) {
            // dA = g . B^T  (rows of g dot rows of B)
            double *ga = a.grad();
            const double *pb = b.data();
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t kk = 0; kk < k; ++kk) {
                    const double *grow = g + i * n;
                    const double *brow = pb + kk * n;
                    double acc = 0.0;
                    for (std::int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    ga[i * k + kk] += acc;
                }
        }
        if (b.requires_grad()) {
            // dB = A^T . g
            double *gb = b.grad();
            const double *pa = a.data();
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t kk = 0; kk < k; ++kk) {
                    const double av = pa[i * k + kk];
                    if (av == 0.0) continue;
                    const double *grow = g + i * n;
                    double *brow = gb + kk * n;
                    for (std::int64_t j = 0; j < n; ++j) brow[j] += av * grow[j];
                }
        }
    });
    return out;
}

Tensor transpose(const Tensor &a) {
    if (a.shape().size() != 2) throw std::invalid_argument("transpose: needs rank 2, got " + shape_string(a.shape()));
    const std::int64_t r = a.rows(), c = a.cols();
    const bool rg = a.requires_grad();
    Tensor out(Shape{c, r}, rg);
    const double *pa = a.data();
    double *po = out.data();
    for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < c; ++j) po[j * r + i] = pa[i * c + j];
    maybe_record(rg, [a, out]() mutable {
        const std::int64_t r = a.rows(), c = a.cols();
        const double *g = out.grad();
        double *ga = a.grad();
        for (std::int64_t i = 0; i < r; ++i)
            for (std::int64_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
    });
    return out;
}

Tensor slice_rows(const Tensor &a, std::int64_t r0, std::int64_t r1) {
    if (a.shape().size() != 2 || r0 < 0 || r1 > a.rows() || r0 >= r1)
        throw std::invalid_argument("slice_rows: bad range [" + std::to_string(r0) + "," + std::to_string(r1) +
                                    ") for " + shape_string(a.shape()));
    const std::int64_t c = a.cols();
    const bool rg = a.requires_grad();
    Tensor out(Shape{r1 - r0, c}, rg);
    std::copy(a.data() + r0 * c, a.data() + r1 * c, out.data());
    maybe_record(rg, [a, out, r0]() mutable {
        const std::int64_t c = a.cols(), n = out.numel();
        const double *g = out.grad();
        double *ga = a.grad() + r0 * c;
        for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i];
    });
    return out;
}

Tensor slice_cols(const Tensor &a, std::int64_t c0, std::int64_t c1) {
    if (a.shape().size() != 2 || c0 < 0 || c1 > a.cols() || c0 >= c1)
        throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) + "," + std::to_string(c1) +
                                    ") for " + shape_string(a.shape()));
    const std::int64_t r = a.rows(), c = a.cols(), w = c1 - c0;
    const bool rg = a.requires_grad();
    Tensor out(Shape{r, w}, rg);
    const double *pa = a.data();
    double *po = out.data();
    for (std::int64_t i = 0; i < r; ++i) std::copy(pa + i * c + c0, pa + i * c + c1, po + i * w);
    maybe_record(rg, [a, out, c0]() mutable {
        const std::int64_t r = a.rows(), c = a.cols(), w = out.cols();
        const double *g = out.grad();
        double *ga = a.grad();
        for (std::int64_t i = 0; i < r; ++i)
            for (std::int64_t j = 0; j < w; ++j) ga[i * c + c0 + j] += g[i * w + j];
    });
    return out;
}

Tensor concat_rows(const std::vector<Tensor> &parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
    const std::int64_t c = parts[0].cols();
    std::int64_t rtotal = 0;
    bool rg = false;
    for (const auto &p : parts) {
        if (p.shape().size() != 2 || p.cols() != c)
            throw std::invalid_argument("concat_rows: column mismatch " + shape_string(p.shape()));
        rtotal += p.rows();
        rg = rg || p.requires_grad();
    }
    Tensor out(Shape{rtotal, c}, rg);
    double *po = out.data();
    for (const auto &p : parts) {
        std::copy(p.data(), p.data() + p.numel(), po);
        po += p.numel();
    }
    maybe_record(rg, [parts, out]() mutable {
        const double *g = out.grad();
        for (auto &p : parts) {
            if (p.requires_grad()) {
                double *gp = p.grad();
                const std::int64_t n = p.numel();
                for (std::int64_t i = 0; i < n; ++i) gp[i] += g[i];
            }
            g += p.numel();
        }
    });
    return out;
}

Tensor concat_cols(const std::vector<Tensor> &parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
    const std::int64_t r = parts[0].rows();
    std::int64_t ctotal = 0;
    bool rg = false;
    for (const auto &p : parts) {
        if (p.shape().size() != 2 || p.rows() != r)
            throw std::invalid_argument("concat_cols: row mismatch " + shape_string(p.shape()));
        ctotal += p.cols();
        rg = rg || p.requires_grad();
    }
    Tensor out(Shape{r, ctotal}, rg);
    double *po = out.data();
    std::int64_t off = 0;
    for (const auto &p : parts) {
        const std::int64_t w = p.cols();
        const double *pp = p.data();
        for (std::int64_t i = 0; i < r; ++i) std::copy(pp + i * w, pp + (i + 1) * w, po + i * ctotal + off);
        off += w;
    }
    maybe_record(rg, [parts, out]() mutable {
        const std::int64_t r = out.rows(), ctotal = out.cols();
        const double *g = out.grad();
        std::int64_t off = 0;
        for (auto &p : parts) {
            const std::int64_t w = p.cols();
            if (p.requires_grad()) {
                double *gp = p.grad();
                for (std::int64_t i = 0; i < r; ++i)
                    for (std::int64_t j = 0; j < w; ++j) gp[i * w + j] += g[i * ctotal + off + j];
            }
            off += w;
        }
    });
    return out;
}

Tensor shift_rows_down(const Tensor &a) {
    if (a.shape().size() != 2) throw std::invalid_argument("shift_rows_down: needs rank 2");
    const std::int64_t r = a.rows(), c = a.cols();
    const bool rg = a.requires_grad();
    Tensor out(a.shape(), rg);
    std::copy(a.data(), a.data() + (r - 1) * c, out.data() + c);
    maybe_record(rg, [a, out]() mutable {
        const std::int64_t r = a.rows(), c = a.cols();
        const double *g = out.grad();
        double *ga = a.grad();
        for (std::int64_t i = 0; i < (r - 1) * c; ++i) ga[i] += g[c + i];
    });
    return out;
}

Tensor shift_rows_up(const Tensor &a) {
    if (a.shape().size() != 2) throw std::invalid_argument("shift_rows_up: needs rank 2");
    const std::int64_t r = a.rows(), c = a.cols();
    const bool rg = a.requires_grad();
    Tensor out(a.shape(), rg);
    std::copy(a.data() + c, a.data() + r * c, out.data());
    maybe_record(rg, [a, out]() mutable {
        const std::int64_t r = a.rows(), c = a.cols();
        const double *g = out.grad();
        double *ga = a.grad();
        for (std::int64_t i = 0; i < (r - 1) * c; ++i) ga[c + i] += g[i];
    });
    return out;
}

Tensor softmax(const Tensor &x) {
    const std::int64_t n = last_dim(x);
    const std::int64_t rows = x.numel() / n;
    const double *px = x.data();
    for (std::int64_t i = 0; i < x.numel(); ++i)
        if (!std::isfinite(px[i])) throw std::invalid_argument("softmax: non-finite input");
    const bool rg = x.requires_grad();
    Tensor out(x.shape(), rg);
    double *po = out.data();
    for (std::int64_t i = 0; i < rows; ++i) {
        const double *row = px + i * n;
        double *orow = po + i * n;
        double mx = row[0];
        for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            orow[j] = std::exp(row[j] - mx);
            z += orow[j];
        }
        for (std::int64_t j = 0; j < n; ++j) orow[j] /= z;
    }
    maybe_record(rg, [x, out]() mutable {
        const std::int64_t n = out.shape().back();
        const std::int64_t rows = out.numel() / n;
        const double *g = out.grad();
        const double *y = out.data();
        double *gx = x.grad();
        for (std::int64_t i = 0; i < rows; ++i) {
            const double *grow = g + i * n;
            const double *yrow = y + i * n;
            double dot = 0.0;
            for (std::int64_t j = 0; j < n; ++j) dot += grow[j] * yrow[j];
            double *gxrow = gx + i * n;
            for (std::int64_t j = 0; j < n; ++j) gxrow[j] += yrow[j] * (grow[j] - dot);
        }
    });
    return out;
}

Tensor masked_softmax(const Tensor &x, const std::vector<std::uint8_t> &mask) {
    if (static_cast<std::int64_t>(mask.size()) != x.numel())
        throw std::invalid_argument("masked_softmax: mask size " + std::to_string(mask.size()) + " vs " +
                                    shape_string(x.shape()));
    const std::int64_t n = last_dim(x);
    const std::int64_t rows = x.numel() / n;
    const double *px = x.data();
    const bool rg = x.requires_grad();
    Tensor out(x.shape(), rg);
    double *po = out.data();
    for (std::int64_t i = 0; i < rows; ++i) {
        const double *row = px + i * n;
        const std::uint8_t *mrow = mask.data() + i * n;
        double *orow = po + i * n;
        double mx = 0.0;
        bool any = false;
        for (std::int64_t j = 0; j < n; ++j) {
            if (!mrow[j]) continue;
            if (!std::isfinite(row[j])) throw std::invalid_argument("masked_softmax: non-finite input");
            mx = any ? std::max(mx, row[j]) : row[j];
            any = true;
        }
        if (!any) throw std::invalid_argument("masked_softmax: fully masked row " + std::to_string(i));
        double z = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            if (mrow[j]) {
                orow[j] = std::exp(row[j] - mx);
                z += orow[j];
            } else {
                orow[j] = 0.0;
            }
        }
        for (std::int64_t j = 0; j < n; ++j) orow[j] /= z;
    }
    // masked entries have y == 0, so the softmax backward form already sends
    // them zero gradient
    maybe_record(rg, [x, out]() mutable {
        const std::int64_t n = out.shape().back();
        const std::int64_t rows = out.numel() / n;
        const double *g = out.grad();
        const double *y = out.data();
        double *gx = x.grad();
        for (std::int64_t i = 0; i < rows; ++i) {
            const double *grow = g + i * n;
            const double *yrow = y + i * n;
            double dot = 0.0;
            for (std::int64_t j = 0; j < n; ++j) dot += grow[j] * yrow[j];
            double *gxrow = gx + i * n;
            for (std::int64_t j = 0; j < n; ++j) gxrow[j] += yrow[j] * (grow[j] - dot);
        }
    });
    return out;
}

Tensor layer_norm(const Tensor &x, const Tensor &gain, const Tensor &bias, double eps) {
    const std::int64_t d = last_dim(x);
    if (gain.numel() != d || bias.numel() != d)
        throw std::invalid_argument("layer_norm: gain/bias must have " + std::to_string(d) + " entries");
    const std::int64_t rows = x.numel() / d;
    const bool rg = x.requires_grad() || gain.requires_grad() || bias.requires_grad();
    Tensor out(x.shape(), rg);
    // keep the normalized rows for backward
    Tensor norm(x.shape());
    const double *px = x.data(), *pg = gain.data(), *pb = bias.data();
    double *po = out.data(), *pn = norm.data();
    std::vector<double> inv_std(static_cast<std::size_t>(rows));
    for (std::int64_t i = 0; i < rows; ++i) {
        const double *row = px + i * d;
        double mean = 0.0;
        for (std::int64_t j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            const double c = row[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double istd = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(i)] = istd;
        for (std::int64_t j = 0; j < d; ++j) {
            pn[i * d + j] = (row[j] - mean) * istd;
            po[i * d + j] = pn[i * d + j] * pg[j] + pb[j];
        }
    }
    maybe_record(rg, [x, gain, bias, out, norm, inv_std = std::move(inv_std)]() mutable {
        const std::int64_t d = out.shape().back();
        const std::int64_t rows = out.numel() / d;
        const double *g = out.grad();
        const double *pn = norm.data();
        const double *pg = gain.data();
        for (std::int64_t i = 0; i < rows; ++i) {
            const double *grow = g + i * d;
            const double *nrow = pn + i * d;
            if (bias.requires_grad()) {
                double *gb = bias.grad();
                for (std::int64_t j = 0; j < d; ++j) gb[j] += grow[j];
            }
            if (gain.requires_grad()) {
                double *gg = gain.grad();
                for (std::int64_t j = 0; j < d; ++j) gg[j] += grow[j] * nrow[j];
            }
            if (x.requires_grad()) {
                double m1 = 0.0, m2 = 0.0;
                for (std::int64_t j = 0; j < d; ++j) {
                    const double gy = grow[j] * pg[j];
                    m1 += gy;
                    m2 += gy * nrow[j];
                }
                m1 /= static_cast<double>(d);
                m2 /= static_cast<double>(d);
                double *gx = x.grad() + i * d;
                const double istd = inv_std[static_cast<std::size_t>(i)];
                for (std::int64_t j = 0; j < d; ++j) {
                    const double gy = grow[j] * pg[j];
                    gx[j] += istd * (gy - m1 - nrow[j] * m2);
                }
            }
        }
    });
    return out;
}

Tensor gelu(const Tensor &x) {
    const bool rg = x.requires_grad();
    Tensor out(x.shape(), rg);
    const std::int64_t n = x.numel();
    const double *px = x.data();
    double *po = out.data();
    for (std::int64_t i = 0; i < n; ++i) {
        const double v = px[i];
        const double u = kGeluC * (v + kGeluA * v * v * v);
        po[i] = 0.5 * v * (1.0 + std::tanh(u));
    }
    maybe_record(rg, [x, out]() mutable {
        const std::int64_t n = out.numel();
        const double *g = out.grad();
        const double *px = x.data();
        double *gx = x.grad();
        for (std::int64_t i = 0; i < n; ++i) {
            const double v = px[i];
            const double u = kGeluC * (v + kGeluA * v * v * v);
            const double t = std::tanh(u);
            const double sech2 = 1.0 - t * t;
            const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
            gx[i] += g[i] * (0.5 * (1.0 + t) + 0.5 * v * sech2 * du);
        }
    });
    return out;
}

Tensor depthwise_conv1d(const Tensor &u, const Tensor &kernel, ConvMode mode) {
    if (u.shape().size() != 2 || kernel.shape().size() != 2 || kernel.cols() != u.cols())
        throw std::invalid_argument("depthwise_conv1d: shapes " + shape_string(u.shape()) + " vs " +
                                    shape_string(kernel.shape()));
    const std::int64_t S = u.rows(), d = u.cols(), k = kernel.rows();
    if (k < 1) throw std::invalid_argument("depthwise_conv1d: k must be >= 1");
    if (mode == ConvMode::symmetric && k % 2 == 0)
        throw std::invalid_argument("depthwise_conv1d: symmetric mode needs odd k, got " + std::to_string(k));
    // offset of kernel tap j relative to the output position
    const std::int64_t base = (mode == ConvMode::causal) ? -(k - 1) : -(k - 1) / 2;
    const bool rg = u.requires_grad() || kernel.requires_grad();
    Tensor out(u.shape(), rg);
    const double *pu = u.data(), *pk = kernel.data();
    double *po = out.data();
    for (std::int64_t t = 0; t < S; ++t)
        for (std::int64_t j = 0; j < k; ++j) {
            const std::int64_t src = t + base + j;
            if (src < 0 || src >= S) continue;
            const double *urow = pu + src * d;
            const double *krow = pk + j * d;
            double *orow = po + t * d;
            for (std::int64_t c = 0; c < d; ++c) orow[c] += urow[c] * krow[c];
        }
    maybe_record(rg, [u, kernel, out, base]() mutable {
        const std::int64_t S = u.rows(), d = u.cols(), k = kernel.rows();
        const double *g = out.grad();
        const double *pu = u.data(), *pk = kernel.data();
        for (std::int64_t t = 0; t < S; ++t)
            for (std::int64_t j = 0; j < k; ++j) {
                const std::int64_t src = t + base + j;
                if (src < 0 || src >= S) continue;
                const double *grow = g + t * d;
                if (u.requires_grad()) {
                    double *gu = u.grad() + src * d;
                    const double *krow = pk + j * d;
                    for (std::int64_t c = 0; c < d; ++c) gu[c] += grow[c] * krow[c];
                }
                if (kernel.requires_grad()) {
                    double *gk = kernel.grad() + j * d;
                    const double *urow = pu + src * d;
                    for (std::int64_t c = 0; c < d; ++c) gk[c] += grow[c] * urow[c];
                }
            }
    });
    return out;
}

Tensor embedding_lookup(const Tensor &table, const std::vector<int> &ids) {
    if (table.shape().size() != 2) throw std::invalid_argument("embedding_lookup: table must be rank 2");
    const std::int64_t V = table.rows(), d = table.cols();
    for (int id : ids)
        if (id < 0 || id >= V)
            throw std::invalid_argument("embedding_lookup: id " + std::to_string(id) + " out of [0," +
                                        std::to_string(V) + ")");
    const std::int64_t N = static_cast<std::int64_t>(ids.size());
    const bool rg = table.requires_grad();
    Tensor out(Shape{N, d}, rg);
    const double *pt = table.data();
    double *po = out.data();
    for (std::int64_t i = 0; i < N; ++i) std::copy(pt + ids[i] * d, pt + (ids[i] + 1) * d, po + i * d);
    maybe_record(rg, [table, out, ids]() mutable {
        const std::int64_t d = table.cols();
        const double *g = out.grad();
        double *gt = table.grad();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            double *trow = gt + static_cast<std::int64_t>(ids[i]) * d;
            const double *grow = g + static_cast<std::int64_t>(i) * d;
            for (std::int64_t c = 0; c < d; ++c) trow[c] += grow[c];
        }
    });
    return out;
}

Tensor cross_entropy(const Tensor &logits, const std::vector<int> &targets) {
    if (logits.shape().size() != 2) throw std::invalid_argument("cross_entropy: logits must be rank 2");
    const std::int64_t N = logits.rows(), V = logits.cols();
    if (static_cast<std::int64_t>(targets.size()) != N)
        throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                                    std::to_string(N) + " rows");
    for (int t : targets)
        if (t < 0 || t >= V)
            throw std::invalid_argument("cross_entropy: target " + std::to_string(t) + " out of [0," +
                                        std::to_string(V) + ")");
    const bool rg = logits.requires_grad();
    Tensor out(Shape{1}, rg);
    // keep row softmaxes for backward
    Tensor probs(logits.shape());
    const double *pl = logits.data();
    double *pp = probs.data();
    double total = 0.0;
    for (std::int64_t i = 0; i < N; ++i) {
        const double *row = pl + i * V;
        double mx = row[0];
        for (std::int64_t j = 1; j < V; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::int64_t j = 0; j < V; ++j) {
            pp[i * V + j] = std::exp(row[j] - mx);
            z += pp[i * V + j];
        }
        for (std::int64_t j = 0; j < V; ++j) pp[i * V + j] /= z;
        total += mx + std::log(z) - row[targets[static_cast<std::size_t>(i)]];
    }
    out.data()[0] = total / static_cast<double>(N);
    maybe_record(rg, [logits, out, probs, targets]() mutable {
        const std::int64_t N = logits.rows(), V = logits.cols();
        const double g = out.grad()[0];
        const double *pp = probs.data();
        double *gl = logits.grad();
        const double inv_n = g / static_cast<double>(N);
        for (std::int64_t i = 0; i < N; ++i) {
            const double *prow = pp + i * V;
            double *grow = gl + i * V;
            for (std::int64_t j = 0; j < V; ++j) grow[j] += prow[j] * inv_n;
            grow[targets[static_cast<std::size_t>(i)]] -= inv_n;
        }
    });
    return out;
}

std::vector<double> nll_rows(const Tensor &logits, const std::vector<int> &targets) {
    const std::int64_t N = logits.rows(), V = logits.cols();
    if (static_cast<std::int64_t>(targets.size()) != N)
        throw std::invalid_argument("nll_rows: " + std::to_string(targets.size()) + " targets for " +
                                    std::to_string(N) + " rows");
    std::vector<double> nll(static_cast<std::size_t>(N));
    const double *pl = logits.data();
    for (std::int64_t i = 0; i < N; ++i) {
        const double *row = pl + i * V;
        double mx = row[0];
        for (std::int64_t j = 1; j < V; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::int64_t j = 0; j < V; ++j) z += std::exp(row[j] - mx);
        nll[static_cast<std::size_t>(i)] = mx + std::log(z) - row[targets[static_cast<std::size_t>(i)]];
    }
    return nll;
}

Tensor pairwise_sqdist(const Tensor &z) {
    if (z.shape().size() != 2) throw std::invalid_argument("pairwise_sqdist: needs rank 2");
    const std::int64_t S = z.rows(), m = z.cols();
    const bool rg = z.requires_grad();
    Tensor out(Shape{S, S}, rg);
    const double *pz = z.data();
    double *po = out.data();
    for (std::int64_t t = 0; t < S; ++t)
        for (std::int64_t s = t + 1; s < S; ++s) {
            const double *a = pz + t * m;
            const double *b = pz + s * m;
            double acc = 0.0;
            for (std::int64_t c = 0; c < m; ++c) {
                const double diff = a[c] - b[c];
                acc += diff * diff;
            }
            po[t * S + s] = acc;
            po[s * S + t] = acc;
        }
    maybe_record(rg, [z, out]() mutable {
        const std::int64_t S = z.rows(), m = z.cols();
        const double *g = out.grad();
        const double *pz = z.data();
        double *gz = z.grad();
        for (std::int64_t t = 0; t < S; ++t)
            for (std::int64_t s = 0; s < S; ++s) {
                const double w = g[t * S + s] + g[s * S + t];
                if (w == 0.0) continue;
                const double *a = pz + t * m;
                const double *b = pz + s * m;
                double *ga = gz + t * m;
                for (std::int64_t c = 0; c < m; ++c) ga[c] += 2.0 * w * (a[c] - b[c]);
            }
    });
    return out;
}

Tensor sum(const Tensor &x) {
    const bool rg = x.requires_grad();
    Tensor out(Shape{1}, rg);
    const std::int64_t n = x.numel();
    const double *px = x.data();
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) acc += px[i];
    out.data()[0] = acc;
    maybe_record(rg, [x, out]() mutable {
        const double g = out.grad()[0];
        double *gx = x.grad();
        const std::int64_t n = x.numel();
        for (std::int64_t i = 0; i < n; ++i) gx[i] += g;
    });
    return out;
}

Tensor mean_all(const Tensor &x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor detach(const Tensor &x) {
    Tensor out(x.shape(), false);
    std::copy(x.data(), x.data() + x.numel(), out.data());
    return out;
}

}  // namespace ketlab

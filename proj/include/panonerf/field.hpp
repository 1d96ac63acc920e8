#pragma once

#include <istream>
#include <ostream>
#include <vector>

#include "panonerf/common.hpp"

namespace panonerf {

// Fourier feature map. Output is [x (if identity)], then per octave j the
// blocks sin(2^j pi x), cos(2^j pi x), componentwise.
struct EncodingConfig {
    int octaves = 0;
    bool include_identity = true;

    bool operator==(const EncodingConfig&) const = default;
};

inline int encoded_dim(int input_dim, const EncodingConfig& cfg) {
    return input_dim * (2 * cfg.octaves + (cfg.include_identity ? 1 : 0));
}

// X is input_dim x n (points as columns). Rows of the result follow the block
// layout documented on EncodingConfig.
template <typename S>
MatX<S> encode_batch(const MatX<S>& X, const EncodingConfig& cfg) {
    const Eigen::Index k = X.rows(), n = X.cols();
    MatX<S> E(encoded_dim(static_cast<int>(k), cfg), n);
    Eigen::Index r = 0;
    if (cfg.include_identity) {
        E.topRows(k) = X;
        r = k;
    }
    for (int j = 0; j < cfg.octaves; ++j) {
        S freq = static_cast<S>(std::ldexp(kPi, j));  // 2^j * pi
        E.middleRows(r, k) = (X.array() * freq).sin();
        E.middleRows(r + k, k) = (X.array() * freq).cos();
        r += 2 * k;
    }
    return E;
}

// Pullback of encode_batch: given dL/dE, returns dL/dX.
template <typename S>
MatX<S> encode_backward(const MatX<S>& X, const EncodingConfig& cfg, const MatX<S>& dE) {
    const Eigen::Index k = X.rows();
    require_domain(dE.rows() == encoded_dim(static_cast<int>(k), cfg) && dE.cols() == X.cols(),
                   "encode_backward: shape mismatch");
    MatX<S> dX = MatX<S>::Zero(k, X.cols());
    Eigen::Index r = 0;
    if (cfg.include_identity) {
        dX = dE.topRows(k);
        r = k;
    }
    for (int j = 0; j < cfg.octaves; ++j) {
        S freq = static_cast<S>(std::ldexp(kPi, j));
        dX.array() += freq * (X.array() * freq).cos() * dE.middleRows(r, k).array();
        dX.array() -= freq * (X.array() * freq).sin() * dE.middleRows(r + k, k).array();
        r += 2 * k;
    }
    return dX;
}

struct FieldConfig {
    int trunk_depth = 4;   // hidden layers in the position trunk
    int trunk_width = 64;
    int color_hidden = 32;
    EncodingConfig pos_enc{6, true};
    EncodingConfig dir_enc{2, true};
    double density_scale = 1.0;  // sigma = density_scale * softplus(raw)
    double pos_scale = 1.0;      // positions are multiplied by this before encoding

    bool operator==(const FieldConfig&) const = default;
};

// Small fully-connected radiance field. The position trunk feeds a linear
// density head (softplus, so sigma >= 0 and never sees the direction) and a
// direction-conditioned color head (sigmoid, so rgb lands in [0,1]).
//
// All parameters live in one flat vector; layers address it through offset
// maps so the optimizer can treat the whole field as a single array. Scalar
// type S is float for training speed or double for gradient checks.
template <typename S>
class RadianceField {
 public:
    using Scalar = S;
    using Mat = MatX<S>;
    using Vec = VecX<S>;

    RadianceField(const FieldConfig& cfg, uint64_t seed) : cfg_(cfg) {
        require_domain(cfg.trunk_depth >= 1 && cfg.trunk_width >= 1 && cfg.color_hidden >= 1,
                       "RadianceField: bad architecture");
        require_domain(cfg.density_scale > 0.0, "RadianceField: density_scale must be positive");
        int dp = encoded_dim(3, cfg.pos_enc);
        int dd = encoded_dim(3, cfg.dir_enc);
        require_domain(dp >= 1 && dd >= 1, "RadianceField: encoding produces no features");

        size_t off = 0;
        auto add = [&](int out, int in) {
            layers_.push_back({in, out, off, off + static_cast<size_t>(out) * in});
            off += static_cast<size_t>(out) * in + out;
        };
        add(cfg.trunk_width, dp);
        for (int l = 1; l < cfg.trunk_depth; ++l) add(cfg.trunk_width, cfg.trunk_width);
        add(1, cfg.trunk_width);                             // density head
        add(cfg.color_hidden, cfg.trunk_width + dd);         // color hidden
        add(3, cfg.color_hidden);                            // color output
        params_ = Vec::Zero(static_cast<Eigen::Index>(off));

        Rng rng(mix_seed(seed, 0x4649454c44ULL));  // field-init stream
        for (const auto& L : layers_) {
            double limit = std::sqrt(6.0 / L.in);
            S* w = params_.data() + L.w_off;
            for (size_t i = 0; i < static_cast<size_t>(L.out) * L.in; ++i) {
                w[i] = static_cast<S>(rng.uniform(-limit, limit));
            }
            // biases stay zero
        }
    }

    const FieldConfig& config() const { return cfg_; }
    Eigen::Index param_count() const { return params_.size(); }
    Vec& params() { return params_; }
    const Vec& params() const { return params_; }

    // Everything backward() needs from a forward pass.
    struct Forward {
        Mat Ep, Ed;               // encodings
        std::vector<Mat> H;       // post-ReLU trunk activations
        ArrX<S> sig_slope;        // d softplus(raw)/d raw = logistic(raw)
        Mat Cin;                  // [trunk output; Ed]
        Mat Hc;                   // color hidden post-ReLU
        Mat rgb;                  // 3 x n, post-sigmoid
        Vec sigma;                // n
        Eigen::Index n = 0;
    };

    // P, D are 3 x n (positions, unit directions).
    void forward(const Mat& P, const Mat& D, Forward& f) const {
        require_domain(P.rows() == 3 && D.rows() == 3 && P.cols() == D.cols(),
                       "RadianceField::forward: bad input shape");
        require_finite(P.allFinite() && D.allFinite(),
                       "RadianceField::forward: non-finite input");
        const Eigen::Index n = P.cols();
        f.n = n;
        f.Ep = encode_batch<S>(P * static_cast<S>(cfg_.pos_scale), cfg_.pos_enc);
        f.Ed = encode_batch<S>(D, cfg_.dir_enc);

        f.H.resize(cfg_.trunk_depth);
        const Mat* in = &f.Ep;
        for (int l = 0; l < cfg_.trunk_depth; ++l) {
            f.H[l].noalias() = W(layers_[l]) * (*in);
            f.H[l].colwise() += b(layers_[l]);
            f.H[l] = f.H[l].cwiseMax(S(0));
            in = &f.H[l];
        }
        const Mat& top = f.H[cfg_.trunk_depth - 1];

        const Layer& Ld = layers_[cfg_.trunk_depth];
        Mat raw = W(Ld) * top;
        raw.colwise() += b(Ld);
        // stable softplus: max(x,0) + log1p(exp(-|x|))
        ArrX<S> r = raw.row(0).transpose().array();
        f.sigma = (static_cast<S>(cfg_.density_scale) *
                   (r.max(S(0)) + (-r.abs()).exp().log1p()))
                      .matrix();
        f.sig_slope = S(1) / (S(1) + (-r).exp());

        f.Cin.resize(cfg_.trunk_width + f.Ed.rows(), n);
        f.Cin.topRows(cfg_.trunk_width) = top;
        f.Cin.bottomRows(f.Ed.rows()) = f.Ed;

        const Layer& Lc1 = layers_[cfg_.trunk_depth + 1];
        f.Hc.noalias() = W(Lc1) * f.Cin;
        f.Hc.colwise() += b(Lc1);
        f.Hc = f.Hc.cwiseMax(S(0));

        const Layer& Lc2 = layers_[cfg_.trunk_depth + 2];
        f.rgb.noalias() = W(Lc2) * f.Hc;
        f.rgb.colwise() += b(Lc2);
        f.rgb = (S(1) / (S(1) + (-f.rgb.array()).exp())).matrix();
    }

    // Accumulates d(loss)/d(params) into grad given upstream dsigma, drgb.
    // grad must be param_count() long; caller zeroes it when starting fresh.
    void backward(const Forward& f, const Vec& dsigma, const Mat& drgb, Vec& grad) const {
        require_domain(dsigma.size() == f.n && drgb.rows() == 3 && drgb.cols() == f.n,
                       "RadianceField::backward: upstream shape mismatch");
        require_domain(grad.size() == params_.size(),
                       "RadianceField::backward: grad buffer size mismatch");
        const Mat& top = f.H[cfg_.trunk_depth - 1];

        // color output (sigmoid)
        Mat dZ = (drgb.array() * f.rgb.array() * (S(1) - f.rgb.array())).matrix();
        const Layer& Lc2 = layers_[cfg_.trunk_depth + 2];
        gW(grad, Lc2).noalias() += dZ * f.Hc.transpose();
        gb(grad, Lc2) += dZ.rowwise().sum();

        // color hidden (ReLU)
        Mat dHc = W(Lc2).transpose() * dZ;
        dHc = (dHc.array() * (f.Hc.array() > S(0)).template cast<S>()).matrix();
        const Layer& Lc1 = layers_[cfg_.trunk_depth + 1];
        gW(grad, Lc1).noalias() += dHc * f.Cin.transpose();
        gb(grad, Lc1) += dHc.rowwise().sum();
        Mat dCin = W(Lc1).transpose() * dHc;

        // density head (softplus)
        Mat draw = (dsigma.transpose().array() * static_cast<S>(cfg_.density_scale) *
                    f.sig_slope.transpose())
                       .matrix();
        const Layer& Ld = layers_[cfg_.trunk_depth];
        gW(grad, Ld).noalias() += draw * top.transpose();
        gb(grad, Ld) += draw.rowwise().sum();

        // trunk
        Mat dA = dCin.topRows(cfg_.trunk_width);
        dA.noalias() += W(Ld).transpose() * draw;
        for (int l = cfg_.trunk_depth - 1; l >= 0; --l) {
            Mat dZl = (dA.array() * (f.H[l].array() > S(0)).template cast<S>()).matrix();
            const Mat& in = (l == 0) ? f.Ep : f.H[l - 1];
            gW(grad, layers_[l]).noalias() += dZl * in.transpose();
            gb(grad, layers_[l]) += dZl.rowwise().sum();
            if (l > 0) dA.noalias() = W(layers_[l]).transpose() * dZl;
        }
    }

 private:
    struct Layer {
        int in, out;
        size_t w_off, b_off;
    };

    Eigen::Map<const Mat> W(const Layer& L) const {
        return Eigen::Map<const Mat>(params_.data() + L.w_off, L.out, L.in);
    }
    Eigen::Map<const Vec> b(const Layer& L) const {
        return Eigen::Map<const Vec>(params_.data() + L.b_off, L.out);
    }
    Eigen::Map<Mat> gW(Vec& g, const Layer& L) const {
        return Eigen::Map<Mat>(g.data() + L.w_off, L.out, L.in);
    }
    Eigen::Map<Vec> gb(Vec& g, const Layer& L) const {
        return Eigen::Map<Vec>(g.data() + L.b_off, L.out);
    }

    FieldConfig cfg_;
    std::vector<Layer> layers_;
    Vec params_;
};

// ---- checkpoint serialization (little-endian; documented in the README) ----

namespace detail {

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    require_data(static_cast<bool>(in), "checkpoint: truncated stream");
    return v;
}

}  // namespace detail

inline constexpr uint32_t kFieldMagic = 0x464e5250u;  // "PRNF" little-endian
inline constexpr uint32_t kFieldVersion = 1u;

// Layout: magic u32, version u32, trunk_depth i32, trunk_width i32,
// color_hidden i32, pos octaves i32, pos identity u8, dir octaves i32,
// dir identity u8, density_scale f64, pos_scale f64, param_count u64,
// then param_count f64 weights.
template <typename S>
void save_field(std::ostream& out, const RadianceField<S>& field) {
    const FieldConfig& c = field.config();
    detail::write_pod(out, kFieldMagic);
    detail::write_pod(out, kFieldVersion);
    detail::write_pod<int32_t>(out, c.trunk_depth);
    detail::write_pod<int32_t>(out, c.trunk_width);
    detail::write_pod<int32_t>(out, c.color_hidden);
    detail::write_pod<int32_t>(out, c.pos_enc.octaves);
    detail::write_pod<uint8_t>(out, c.pos_enc.include_identity ? 1 : 0);
    detail::write_pod<int32_t>(out, c.dir_enc.octaves);
    detail::write_pod<uint8_t>(out, c.dir_enc.include_identity ? 1 : 0);
    detail::write_pod<double>(out, c.density_scale);
    detail::write_pod<double>(out, c.pos_scale);
    detail::write_pod<uint64_t>(out, static_cast<uint64_t>(field.param_count()));
    for (Eigen::Index i = 0; i < field.param_count(); ++i) {
        detail::write_pod<double>(out, static_cast<double>(field.params()[i]));
    }
}

template <typename S>
RadianceField<S> load_field(std::istream& in) {
    require_data(detail::read_pod<uint32_t>(in) == kFieldMagic, "checkpoint: bad magic");
    require_data(detail::read_pod<uint32_t>(in) == kFieldVersion, "checkpoint: bad version");
    FieldConfig c;
    c.trunk_depth = detail::read_pod<int32_t>(in);
    c.trunk_width = detail::read_pod<int32_t>(in);
    c.color_hidden = detail::read_pod<int32_t>(in);
    c.pos_enc.octaves = detail::read_pod<int32_t>(in);
    c.pos_enc.include_identity = detail::read_pod<uint8_t>(in) != 0;
    c.dir_enc.octaves = detail::read_pod<int32_t>(in);
    c.dir_enc.include_identity = detail::read_pod<uint8_t>(in) != 0;
    c.density_scale = detail::read_pod<double>(in);
    c.pos_scale = detail::read_pod<double>(in);
    uint64_t count = detail::read_pod<uint64_t>(in);
    RadianceField<S> field(c, 0);
    require_data(count == static_cast<uint64_t>(field.param_count()),
                 "checkpoint: weight count disagrees with architecture header");
    for (uint64_t i = 0; i < count; ++i) {
        field.params()[static_cast<Eigen::Index>(i)] =
            static_cast<S>(detail::read_pod<double>(in));
    }
    return field;
}

}  // namespace panonerf

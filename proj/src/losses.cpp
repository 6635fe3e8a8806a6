#include "porerec/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "porerec/rng.hpp"

namespace porerec {

std::array<SlicePlane, 3> extract_slices(const Tensor5& y, int x, int yy, int z) {
    if (x < 0 || x >= y.w || yy < 0 || yy >= y.h || z < 0 || z >= y.d)
        throw std::invalid_argument("extract_slices: point out of bounds");

    std::array<SlicePlane, 3> out;
    out[0] = {SliceOrientation::XY, z, y.c, y.h, y.w, {}};
    out[1] = {SliceOrientation::XZ, yy, y.c, y.d, y.w, {}};
    out[2] = {SliceOrientation::YZ, x, y.c, y.d, y.h, {}};
    for (auto& s : out) s.values.resize(static_cast<std::size_t>(s.channels) * s.rows * s.cols);

    for (int c = 0; c < y.c; ++c) {
        for (int r = 0; r < y.h; ++r)
            for (int col = 0; col < y.w; ++col) out[0].values[out[0].at(c, r, col)] = y.at(0, c, z, r, col);
        for (int r = 0; r < y.d; ++r)
            for (int col = 0; col < y.w; ++col) out[1].values[out[1].at(c, r, col)] = y.at(0, c, r, yy, col);
        for (int r = 0; r < y.d; ++r)
            for (int col = 0; col < y.h; ++col) out[2].values[out[2].at(c, r, col)] = y.at(0, c, r, col, x);
    }
    return out;
}

GramMatrix gram(const std::vector<double>& features, int channels) {
    if (channels < 1 || features.empty() || features.size() % channels != 0)
        throw std::invalid_argument("gram: bad feature shape");
    const std::size_t p = features.size() / channels;
    GramMatrix g;
    g.size = channels;
    g.position_count = static_cast<std::int64_t>(p);
    g.values.assign(static_cast<std::size_t>(channels) * channels, 0.0);
    const double inv_p = 1.0 / static_cast<double>(p);
    for (int i = 0; i < channels; ++i) {
        const double* fi = &features[static_cast<std::size_t>(i) * p];
        for (int j = i; j < channels; ++j) {
            const double* fj = &features[static_cast<std::size_t>(j) * p];
            double acc = 0;
            for (std::size_t t = 0; t < p; ++t) acc += fi[t] * fj[t];
            g.values[static_cast<std::size_t>(i) * channels + j] = acc * inv_p;
            g.values[static_cast<std::size_t>(j) * channels + i] = acc * inv_p;
        }
    }
    return g;
}

namespace {

// Mirror index for reflect padding without edge duplication: -1 -> 1,
// n -> n-2.  Requires n >= 2.
inline int reflect(int t, int n) { return t < 0 ? -t : (t >= n ? 2 * n - 2 - t : t); }

// (C, rows, cols) -> (C, rows+2, cols+2) with 1-pixel reflected border.
std::vector<double> reflect_pad(const std::vector<double>& x, int c, int rows, int cols) {
    std::vector<double> out(static_cast<std::size_t>(c) * (rows + 2) * (cols + 2));
    for (int ch = 0; ch < c; ++ch)
        for (int y = -1; y <= rows; ++y) {
            const double* src =
                &x[(static_cast<std::size_t>(ch) * rows + reflect(y, rows)) * cols];
            double* dst = &out[(static_cast<std::size_t>(ch) * (rows + 2) + (y + 1)) *
                               (cols + 2)];
            dst[0] = src[reflect(-1, cols)];
            for (int xx = 0; xx < cols; ++xx) dst[xx + 1] = src[xx];
            dst[cols + 1] = src[reflect(cols, cols)];
        }
    return out;
}

// Valid 3x3 correlation: (in_c, rows, cols) -> (out_c, rows-2, cols-2).
std::vector<double> valid_conv2d(const std::vector<double>& x, int in_c, int rows, int cols,
                                 const std::vector<double>& w, const std::vector<double>& bias,
                                 int out_c) {
    const int ro = rows - 2, co = cols - 2;
    std::vector<double> out(static_cast<std::size_t>(out_c) * ro * co);
    for (int o = 0; o < out_c; ++o)
        for (int y = 0; y < ro; ++y) {
            double* dst = &out[(static_cast<std::size_t>(o) * ro + y) * co];
            const double b = bias.empty() ? 0.0 : bias[o];
            for (int xx = 0; xx < co; ++xx) dst[xx] = b;
            for (int i = 0; i < in_c; ++i)
                for (int dy = 0; dy < 3; ++dy) {
                    const double* src =
                        &x[(static_cast<std::size_t>(i) * rows + y + dy) * cols];
                    const double* kk =
                        &w[((static_cast<std::size_t>(o) * in_c + i) * 3 + dy) * 3];
                    const double k0 = kk[0], k1 = kk[1], k2 = kk[2];
                    for (int xx = 0; xx < co; ++xx)
                        dst[xx] += k0 * src[xx] + k1 * src[xx + 1] + k2 * src[xx + 2];
                }
        }
    return out;
}

double normal_at(std::uint64_t seed, std::uint64_t k) {
    double u1 = counter_uniform(seed, 2 * k);
    double u2 = counter_uniform(seed, 2 * k + 1);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

}  // namespace

FeatureBank::FeatureBank(const FeatureBankConfig& cfg) : cfg_(cfg) {
    if (cfg.widths.empty()) throw std::invalid_argument("FeatureBank: need at least one layer");
    if (cfg.layer_weights.size() != cfg.widths.size())
        throw std::invalid_argument("FeatureBank: one weight per layer required");
    if (cfg.input_channels < 1) throw std::invalid_argument("FeatureBank: bad input channels");

    std::uint64_t counter = 0;
    int in_c = cfg.input_channels;
    for (int width : cfg.widths) {
        if (width < 1) throw std::invalid_argument("FeatureBank: layer width must be >= 1");
        Layer l;
        l.in_c = in_c;
        l.out_c = width;
        const int fan_in = in_c * 9;
        const double stddev = std::sqrt(2.0 / fan_in);
        l.w.resize(static_cast<std::size_t>(width) * fan_in);
        for (double& v : l.w) v = stddev * normal_at(cfg.seed, counter++);
        l.b.assign(width, 0.0);
        layers_.push_back(std::move(l));
        in_c = width;
    }
}

std::vector<std::vector<double>> FeatureBank::features(const std::vector<double>& input, int rows,
                                                       int cols) const {
    if (rows < 2 || cols < 2) throw std::invalid_argument("FeatureBank: input smaller than 2x2");
    if (input.size() != static_cast<std::size_t>(cfg_.input_channels) * rows * cols)
        throw std::invalid_argument("FeatureBank: input channel mismatch");

    std::vector<std::vector<double>> feats;
    feats.reserve(layers_.size());
    const std::vector<double>* cur = &input;
    int cur_c = cfg_.input_channels;
    for (const Layer& l : layers_) {
        std::vector<double> padded = reflect_pad(*cur, cur_c, rows, cols);
        std::vector<double> f = valid_conv2d(padded, l.in_c, rows + 2, cols + 2, l.w, l.b, l.out_c);
        for (double& v : f) v = v > 0 ? v : cfg_.relu_slope * v;
        feats.push_back(std::move(f));
        cur = &feats.back();
        cur_c = l.out_c;
    }
    return feats;
}

std::vector<double> FeatureBank::backward(const std::vector<std::vector<double>>& feats, int rows,
                                          int cols,
                                          const std::vector<std::vector<double>>& feature_grads) const {
    if (feats.size() != layers_.size() || feature_grads.size() != layers_.size())
        throw std::invalid_argument("FeatureBank::backward: layer count mismatch");

    std::vector<double> carry;  // gradient wrt the current layer's output
    for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
        const Layer& ly = layers_[l];
        if (carry.empty())
            carry = feature_grads[l];
        else
            for (std::size_t i = 0; i < carry.size(); ++i) carry[i] += feature_grads[l][i];

        // LeakyReLU gate; output sign equals pre-activation sign.
        for (std::size_t i = 0; i < carry.size(); ++i)
            if (feats[l][i] <= 0) carry[i] *= cfg_.relu_slope;

        // Gradient wrt the padded input = full correlation with the kernel
        // flipped in space and transposed in channels.
        std::vector<double> gpad(static_cast<std::size_t>(ly.out_c) * (rows + 4) * (cols + 4), 0.0);
        for (int o = 0; o < ly.out_c; ++o)
            for (int y = 0; y < rows; ++y) {
                const double* src = &carry[(static_cast<std::size_t>(o) * rows + y) * cols];
                double* dst =
                    &gpad[(static_cast<std::size_t>(o) * (rows + 4) + y + 2) * (cols + 4) + 2];
                for (int xx = 0; xx < cols; ++xx) dst[xx] = src[xx];
            }
        std::vector<double> wflip(static_cast<std::size_t>(ly.in_c) * ly.out_c * 9);
        for (int o = 0; o < ly.out_c; ++o)
            for (int i = 0; i < ly.in_c; ++i)
                for (int dy = 0; dy < 3; ++dy)
                    for (int dx = 0; dx < 3; ++dx)
                        wflip[((static_cast<std::size_t>(i) * ly.out_c + o) * 3 + (2 - dy)) * 3 +
                              (2 - dx)] =
                            ly.w[((static_cast<std::size_t>(o) * ly.in_c + i) * 3 + dy) * 3 + dx];
        std::vector<double> gin_padded =
            valid_conv2d(gpad, ly.out_c, rows + 4, cols + 4, wflip, {}, ly.in_c);

        // Fold the reflected border back onto its source pixels.
        std::vector<double> gin(static_cast<std::size_t>(ly.in_c) * rows * cols, 0.0);
        for (int i = 0; i < ly.in_c; ++i)
            for (int y = -1; y <= rows; ++y)
                for (int xx = -1; xx <= cols; ++xx)
                    gin[(static_cast<std::size_t>(i) * rows + reflect(y, rows)) * cols +
                        reflect(xx, cols)] +=
                        gin_padded[(static_cast<std::size_t>(i) * (rows + 2) + y + 1) *
                                   (cols + 2) +
                                   xx + 1];
        carry = std::move(gin);
    }
    return carry;
}

ReferenceSet ReferenceSet::isotropic(Image2D ref) {
    ReferenceSet s;
    s.images = {ref, ref, std::move(ref)};
    s.anisotropic = false;
    return s;
}

ReferenceSet ReferenceSet::from_three(Image2D xy, Image2D xz, Image2D yz) {
    ReferenceSet s;
    s.images = {std::move(xy), std::move(xz), std::move(yz)};
    s.anisotropic = true;
    return s;
}

std::vector<double> lift_reference(const Image2D& img, int channels) {
    std::vector<double> out(static_cast<std::size_t>(channels) * img.pixels.size());
    for (int c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < img.pixels.size(); ++i)
            out[static_cast<std::size_t>(c) * img.pixels.size() + i] = img.pixels[i];
    return out;
}

GramLoss::GramLoss(const ReferenceSet& refs, std::shared_ptr<const FeatureBank> bank)
    : bank_(std::move(bank)) {
    if (!bank_) throw std::invalid_argument("GramLoss: null feature bank");
    for (int k = 0; k < 3; ++k) {
        const Image2D& ref = refs.images[k];
        std::vector<double> lifted = lift_reference(ref, bank_->config().input_channels);
        auto feats = bank_->features(lifted, ref.height, ref.width);
        std::vector<GramMatrix> grams;
        for (int l = 0; l < bank_->layers(); ++l)
            grams.push_back(gram(feats[l], bank_->layers_[l].out_c));
        ref_grams_[k] = std::move(grams);
    }
}

double SliceLoss::evaluate(const std::array<SlicePlane, 3>& slices,
                           std::array<std::vector<double>, 3>* grads) const {
    double total = 0;
    for (int k = 0; k < 3; ++k) total += evaluate_one(slices[k], grads ? &(*grads)[k] : nullptr);
    return total;
}

double GramLoss::evaluate_one(const SlicePlane& s, std::vector<double>* grad) const {
    if (s.channels != bank_->config().input_channels)
        throw std::invalid_argument("GramLoss: slice channels do not match the bank input");
    const int k = static_cast<int>(s.orientation);
    auto feats = bank_->features(s.values, s.rows, s.cols);

    double total = 0;
    std::vector<std::vector<double>> fgrads;
    if (grad) fgrads.resize(feats.size());
    for (std::size_t l = 0; l < feats.size(); ++l) {
        const int c = bank_->layers_[l].out_c;
        const GramMatrix gs = gram(feats[l], c);
        const GramMatrix& gr = ref_grams_[k][l];
        const double wl = bank_->config().layer_weights[l];
        const double norm = wl / (static_cast<double>(c) * c);
        double lsum = 0;
        for (std::size_t i = 0; i < gs.values.size(); ++i) {
            const double d = gs.values[i] - gr.values[i];
            lsum += d * d;
        }
        total += norm * lsum;

        if (grad) {
            // dL/dF = (4 norm / P) * (G_s - G_ref) F, using Gram symmetry.
            const std::size_t p = feats[l].size() / c;
            const double scale = 4.0 * norm / static_cast<double>(p);
            fgrads[l].assign(feats[l].size(), 0.0);
            for (int a = 0; a < c; ++a) {
                double* dst = &fgrads[l][static_cast<std::size_t>(a) * p];
                for (int j = 0; j < c; ++j) {
                    const double d = scale * (gs.values[static_cast<std::size_t>(a) * c + j] -
                                              gr.values[static_cast<std::size_t>(a) * c + j]);
                    if (d == 0.0) continue;
                    const double* fj = &feats[l][static_cast<std::size_t>(j) * p];
                    for (std::size_t t = 0; t < p; ++t) dst[t] += d * fj[t];
                }
            }
        }
    }
    if (grad) *grad = bank_->backward(feats, s.rows, s.cols, fgrads);
    return total;
}

std::vector<double> acf_table(const std::vector<double>& img, int channels, int rows, int cols,
                              int max_lag) {
    if (channels < 1 || rows < 1 || cols < 1 ||
        img.size() != static_cast<std::size_t>(channels) * rows * cols)
        throw std::invalid_argument("acf_table: bad image shape");
    if (max_lag < 0 || max_lag >= rows || max_lag >= cols)
        throw std::invalid_argument("acf_table: max_lag out of range");

    // Channel-mean image.
    std::vector<double> f(static_cast<std::size_t>(rows) * cols, 0.0);
    const std::size_t plane = f.size();
    for (int c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < plane; ++i) f[i] += img[static_cast<std::size_t>(c) * plane + i];
    const double inv_c = 1.0 / channels;
    for (double& v : f) v *= inv_c;

    const int L = max_lag + 1;
    std::vector<double> table(static_cast<std::size_t>(L) * L, 0.0);
    for (int tau = 0; tau < L; ++tau)
        for (int ups = 0; ups < L; ++ups) {
            double acc = 0;
            for (int i = 0; i + tau < rows; ++i) {
                const double* a = &f[static_cast<std::size_t>(i) * cols];
                const double* b = &f[static_cast<std::size_t>(i + tau) * cols + ups];
                const int n = cols - ups;
                for (int j = 0; j < n; ++j) acc += a[j] * b[j];
            }
            table[static_cast<std::size_t>(tau) * L + ups] =
                acc / (static_cast<double>(rows - tau) * (cols - ups));
        }
    return table;
}

AcfLoss::AcfLoss(const ReferenceSet& refs, int max_lag) : max_lag_(max_lag) {
    for (int k = 0; k < 3; ++k) {
        const Image2D& ref = refs.images[k];
        std::vector<double> f(ref.pixels.begin(), ref.pixels.end());
        ref_tables_[k] = acf_table(f, 1, ref.height, ref.width, max_lag);
    }
}

double AcfLoss::evaluate_one(const SlicePlane& s, std::vector<double>* grad) const {
    const int L = max_lag_ + 1;
    const int k = static_cast<int>(s.orientation);
    std::vector<double> st = acf_table(s.values, s.channels, s.rows, s.cols, max_lag_);
    const std::vector<double>& rt = ref_tables_[k];

    double total = 0;
    if (!grad) {
        for (std::size_t i = 0; i < st.size(); ++i) {
            const double d = st[i] - rt[i];
            total += d * d;
        }
        return total;
    }

    // Channel-mean map (the quantity the table is quadratic in).
    const std::size_t plane = static_cast<std::size_t>(s.rows) * s.cols;
    std::vector<double> f(plane, 0.0);
    for (int c = 0; c < s.channels; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            f[i] += s.values[static_cast<std::size_t>(c) * plane + i];
    const double inv_c = 1.0 / s.channels;
    for (double& v : f) v *= inv_c;

    std::vector<double> gf(plane, 0.0);
    for (int tau = 0; tau < L; ++tau)
        for (int ups = 0; ups < L; ++ups) {
            const double d = st[static_cast<std::size_t>(tau) * L + ups] -
                             rt[static_cast<std::size_t>(tau) * L + ups];
            total += d * d;
            const double coef = 2.0 * d / (static_cast<double>(s.rows - tau) * (s.cols - ups));
            if (coef == 0.0) continue;
            // f(i,j) pairs with f(i+tau,j+ups) and with f(i-tau,j-ups).
            for (int i = 0; i + tau < s.rows; ++i) {
                double* ga = &gf[static_cast<std::size_t>(i) * s.cols];
                double* gb = &gf[static_cast<std::size_t>(i + tau) * s.cols + ups];
                const double* fa = &f[static_cast<std::size_t>(i) * s.cols];
                const double* fb = &f[static_cast<std::size_t>(i + tau) * s.cols + ups];
                const int n = s.cols - ups;
                for (int j = 0; j < n; ++j) {
                    ga[j] += coef * fb[j];
                    gb[j] += coef * fa[j];
                }
            }
        }

    grad->assign(s.values.size(), 0.0);
    for (int c = 0; c < s.channels; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            (*grad)[static_cast<std::size_t>(c) * plane + i] = gf[i] * inv_c;
    return total;
}

}  // namespace porerec

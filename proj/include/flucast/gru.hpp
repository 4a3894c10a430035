#ifndef FLUCAST_GRU_HPP
#define FLUCAST_GRU_HPP

#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flucast/attribution.hpp"
#include "flucast/errors.hpp"
#include "flucast/rng.hpp"

#include <json.hpp>

namespace flucast {

/// Dense row-major matrix, just enough linear algebra for a small GRU.
struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

namespace detail {

inline void matvec(const Mat& m, std::span<const double> v, std::vector<double>& out) {
    for (std::size_t r = 0; r < m.rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c)
            acc += m(r, c) * v[c];
        out[r] += acc;
    }
}

inline void matvec_transposed(const Mat& m, std::span<const double> v,
                              std::vector<double>& out) {
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c)
            out[c] += m(r, c) * v[r];
}

/// grad += d (outer) v
inline void outer_acc(Mat& grad, std::span<const double> d, std::span<const double> v) {
    for (std::size_t r = 0; r < grad.rows; ++r)
        for (std::size_t c = 0; c < grad.cols; ++c)
            grad(r, c) += d[r] * v[c];
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace detail

struct GruDims {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 5;
    std::size_t output_dim = 0;
};

/// Standard GRU cell with update gate z, reset gate r, tanh candidate,
/// linear readout from the final hidden state (dropout applied there).
struct GruParameters {
    GruDims dims;
    Mat w_z, w_r, w_h; // hidden x input
    Mat u_z, u_r, u_h; // hidden x hidden
    std::vector<double> b_z, b_r, b_h;
    Mat w_o;           // output x hidden
    std::vector<double> b_o;
};

struct TrainConfig {
    double learning_rate = 0.001;
    std::size_t epochs = 1000;
    double dropout_rate = 0.3;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
};

inline GruParameters init_gru(GruDims dims, std::uint64_t seed) {
    if (dims.input_dim == 0 || dims.hidden_dim == 0 || dims.output_dim == 0)
        throw ModelError("init_gru: dimensions must be positive");
    GruParameters p;
    p.dims = dims;
    Rng rng = make_rng(seed);
    auto fill = [&](Mat& m, std::size_t r, std::size_t c) {
        m = Mat(r, c);
        double s = 1.0 / std::sqrt(static_cast<double>(c)); // fan-in = columns
        for (auto& v : m.data) v = rng.uniform(-s, s);
    };
    fill(p.w_z, dims.hidden_dim, dims.input_dim);
    fill(p.w_r, dims.hidden_dim, dims.input_dim);
    fill(p.w_h, dims.hidden_dim, dims.input_dim);
    fill(p.u_z, dims.hidden_dim, dims.hidden_dim);
    fill(p.u_r, dims.hidden_dim, dims.hidden_dim);
    fill(p.u_h, dims.hidden_dim, dims.hidden_dim);
    p.b_z.assign(dims.hidden_dim, 0.0);
    p.b_r.assign(dims.hidden_dim, 0.0);
    p.b_h.assign(dims.hidden_dim, 0.0);
    fill(p.w_o, dims.output_dim, dims.hidden_dim);
    p.b_o.assign(dims.output_dim, 0.0);
    return p;
}

/// Per-step activations cached for backpropagation through time.
struct GruForwardResult {
    std::vector<std::vector<double>> hidden; // h_1..h_N
    std::vector<std::vector<double>> z, r, candidate;
    std::vector<double> output;
};

/// Run the cell over one sequence (steps x input_dim). `dropout_mask`,
/// when present, is a pre-scaled (inverted dropout) per-unit mask applied
/// to h_N before the readout; inference passes nothing and uses ones.
inline GruForwardResult gru_forward(const GruParameters& p,
                                    const std::vector<std::vector<double>>& sequence,
                                    const std::vector<double>* dropout_mask = nullptr) {
    const std::size_t hd = p.dims.hidden_dim;
    GruForwardResult res;
    std::vector<double> h(hd, 0.0);
    for (const auto& x : sequence) {
        if (x.size() != p.dims.input_dim)
            throw ModelError("gru_forward: step length does not match input_dim");
        for (double v : x)
            if (!std::isfinite(v))
                throw ModelError("gru_forward: non-finite input");
        std::vector<double> az(p.b_z), ar(p.b_r), ah(p.b_h);
        detail::matvec(p.w_z, x, az);
        detail::matvec(p.u_z, h, az);
        detail::matvec(p.w_r, x, ar);
        detail::matvec(p.u_r, h, ar);
        std::vector<double> z(hd), r(hd);
        for (std::size_t i = 0; i < hd; ++i) {
            z[i] = detail::sigmoid(az[i]);
            r[i] = detail::sigmoid(ar[i]);
        }
        std::vector<double> rh(hd);
        for (std::size_t i = 0; i < hd; ++i) rh[i] = r[i] * h[i];
        detail::matvec(p.w_h, x, ah);
        detail::matvec(p.u_h, rh, ah);
        std::vector<double> cand(hd), h_next(hd);
        for (std::size_t i = 0; i < hd; ++i) {
            cand[i] = std::tanh(ah[i]);
            h_next[i] = (1.0 - z[i]) * h[i] + z[i] * cand[i];
        }
        res.z.push_back(std::move(z));
        res.r.push_back(std::move(r));
        res.candidate.push_back(std::move(cand));
        res.hidden.push_back(h_next);
        h = std::move(h_next);
    }
    std::vector<double> masked(h);
    if (dropout_mask) {
        if (dropout_mask->size() != hd)
            throw ModelError("gru_forward: dropout mask shape mismatch");
        for (std::size_t i = 0; i < hd; ++i) masked[i] *= (*dropout_mask)[i];
    }
    res.output.assign(p.b_o.begin(), p.b_o.end());
    detail::matvec(p.w_o, masked, res.output);
    return res;
}

struct GruGradients {
    Mat w_z, w_r, w_h, u_z, u_r, u_h, w_o;
    std::vector<double> b_z, b_r, b_h, b_o;

    explicit GruGradients(const GruDims& d)
        : w_z(d.hidden_dim, d.input_dim), w_r(d.hidden_dim, d.input_dim),
          w_h(d.hidden_dim, d.input_dim), u_z(d.hidden_dim, d.hidden_dim),
          u_r(d.hidden_dim, d.hidden_dim), u_h(d.hidden_dim, d.hidden_dim),
          w_o(d.output_dim, d.hidden_dim), b_z(d.hidden_dim, 0.0),
          b_r(d.hidden_dim, 0.0), b_h(d.hidden_dim, 0.0), b_o(d.output_dim, 0.0) {}

    void scale(double s) {
        for (Mat* m : {&w_z, &w_r, &w_h, &u_z, &u_r, &u_h, &w_o})
            for (auto& v : m->data) v *= s;
        for (auto* b : {&b_z, &b_r, &b_h, &b_o})
            for (auto& v : *b) v *= s;
    }
};

namespace detail {

/// Backprop one sequence given d(loss)/d(output); accumulates parameter
/// gradients into `grads` and writes d(loss)/d(input) into `input_grad`
/// (steps x input_dim, overwritten).
inline void gru_backward_one(const GruParameters& p,
                             const std::vector<std::vector<double>>& sequence,
                             const GruForwardResult& fwd,
                             std::span<const double> d_output,
                             const std::vector<double>* dropout_mask,
                             GruGradients& grads,
                             std::vector<std::vector<double>>& input_grad) {
    const std::size_t hd = p.dims.hidden_dim;
    const std::size_t steps = sequence.size();
    input_grad.assign(steps, std::vector<double>(p.dims.input_dim, 0.0));

    std::vector<double> h_last = fwd.hidden[steps - 1];
    std::vector<double> masked(h_last);
    if (dropout_mask)
        for (std::size_t i = 0; i < hd; ++i) masked[i] *= (*dropout_mask)[i];

    outer_acc(grads.w_o, d_output, masked);
    for (std::size_t k = 0; k < p.dims.output_dim; ++k)
        grads.b_o[k] += d_output[k];

    std::vector<double> dh(hd, 0.0);
    matvec_transposed(p.w_o, d_output, dh);
    if (dropout_mask)
        for (std::size_t i = 0; i < hd; ++i) dh[i] *= (*dropout_mask)[i];

    for (std::size_t t = steps; t-- > 0;) {
        const auto& x = sequence[t];
        const auto& z = fwd.z[t];
        const auto& r = fwd.r[t];
        const auto& cand = fwd.candidate[t];
        const std::vector<double> h_prev =
            t > 0 ? fwd.hidden[t - 1] : std::vector<double>(hd, 0.0);

        std::vector<double> da_h(hd), da_r(hd), da_z(hd), dh_prev(hd, 0.0);
        std::vector<double> d_rh(hd, 0.0);
        for (std::size_t i = 0; i < hd; ++i) {
            double dcand = dh[i] * z[i];
            da_h[i] = dcand * (1.0 - cand[i] * cand[i]);
            double dz = dh[i] * (cand[i] - h_prev[i]);
            da_z[i] = dz * z[i] * (1.0 - z[i]);
            dh_prev[i] = dh[i] * (1.0 - z[i]);
        }
        matvec_transposed(p.u_h, da_h, d_rh);
        for (std::size_t i = 0; i < hd; ++i) {
            double dr = d_rh[i] * h_prev[i];
            da_r[i] = dr * r[i] * (1.0 - r[i]);
            dh_prev[i] += d_rh[i] * r[i];
        }
        matvec_transposed(p.u_r, da_r, dh_prev);
        matvec_transposed(p.u_z, da_z, dh_prev);

        std::vector<double> rh(hd);
        for (std::size_t i = 0; i < hd; ++i) rh[i] = r[i] * h_prev[i];
        outer_acc(grads.w_h, da_h, x);
        outer_acc(grads.u_h, da_h, rh);
        outer_acc(grads.w_r, da_r, x);
        outer_acc(grads.u_r, da_r, h_prev);
        outer_acc(grads.w_z, da_z, x);
        outer_acc(grads.u_z, da_z, h_prev);
        for (std::size_t i = 0; i < hd; ++i) {
            grads.b_h[i] += da_h[i];
            grads.b_r[i] += da_r[i];
            grads.b_z[i] += da_z[i];
        }
        matvec_transposed(p.w_h, da_h, input_grad[t]);
        matvec_transposed(p.w_r, da_r, input_grad[t]);
        matvec_transposed(p.w_z, da_z, input_grad[t]);

        dh = std::move(dh_prev);
    }
}

} // namespace detail

struct GruBatchGradients {
    GruGradients params;
    std::vector<std::vector<std::vector<double>>> inputs; // per example
    double loss = 0.0;

    explicit GruBatchGradients(const GruDims& d) : params(d) {}
};

/// Exact MSE gradients over a batch via BPTT. Loss is the mean over batch
/// and output channels of squared error. `dropout_masks` may be empty
/// (no dropout) or hold one pre-scaled mask per example.
inline GruBatchGradients gru_backward(
    const GruParameters& p, const std::vector<std::vector<std::vector<double>>>& inputs,
    const std::vector<std::vector<double>>& targets,
    const std::vector<std::vector<double>>& dropout_masks = {}) {
    if (inputs.empty() || inputs.size() != targets.size())
        throw ModelError("gru_backward: empty batch or input/target mismatch");
    if (!dropout_masks.empty() && dropout_masks.size() != inputs.size())
        throw ModelError("gru_backward: mask count mismatch");
    const std::size_t batch = inputs.size();
    const std::size_t od = p.dims.output_dim;
    const double denom = static_cast<double>(batch * od);

    GruBatchGradients out(p.dims);
    out.inputs.resize(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const std::vector<double>* mask =
            dropout_masks.empty() ? nullptr : &dropout_masks[b];
        auto fwd = gru_forward(p, inputs[b], mask);
        if (targets[b].size() != od)
            throw ModelError("gru_backward: target length mismatch");
        std::vector<double> d_output(od);
        for (std::size_t k = 0; k < od; ++k) {
            double err = fwd.output[k] - targets[b][k];
            out.loss += err * err / denom;
            d_output[k] = 2.0 * err / denom;
        }
        detail::gru_backward_one(p, inputs[b], fwd, d_output, mask, out.params,
                                 out.inputs[b]);
    }
    return out;
}

struct TrainResult {
    GruParameters params;
    std::vector<double> loss_trace; // mean minibatch loss per epoch
};

/// Plain SGD over seed-shuffled minibatches with fresh inverted-dropout
/// masks on h_N each minibatch. Deterministic per (seed, data, config).
inline TrainResult train_gru(GruParameters params,
                             const std::vector<std::vector<std::vector<double>>>& inputs,
                             const std::vector<std::vector<double>>& targets,
                             const TrainConfig& config) {
    if (inputs.empty())
        throw ModelError("train_gru: empty training set");
    if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0))
        throw ModelError("train_gru: dropout rate must lie in [0, 1)");
    Rng root = make_rng(config.seed);
    Rng shuffle_rng = root.stream("shuffle");
    Rng mask_rng = root.stream("dropout");
    const std::size_t n = inputs.size();
    const std::size_t hd = params.dims.hidden_dim;
    const double keep = 1.0 - config.dropout_rate;

    TrainResult res;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            std::size_t end = std::min(n, start + config.batch_size);
            std::vector<std::vector<std::vector<double>>> bx;
            std::vector<std::vector<double>> by;
            for (std::size_t i = start; i < end; ++i) {
                bx.push_back(inputs[order[i]]);
                by.push_back(targets[order[i]]);
            }
            std::vector<std::vector<double>> masks;
            if (config.dropout_rate > 0.0) {
                masks.resize(bx.size(), std::vector<double>(hd));
                for (auto& m : masks)
                    for (auto& v : m)
                        v = mask_rng.uniform01() < keep ? 1.0 / keep : 0.0;
            }
            auto grads = gru_backward(params, bx, by, masks);
            if (!std::isfinite(grads.loss))
                throw ModelError("train_gru: non-finite loss at epoch " +
                                 std::to_string(epoch));
            epoch_loss += grads.loss;
            ++batches;

            const double lr = config.learning_rate;
            auto step_mat = [&](Mat& w, const Mat& g) {
                for (std::size_t i = 0; i < w.data.size(); ++i)
                    w.data[i] -= lr * g.data[i];
            };
            step_mat(params.w_z, grads.params.w_z);
            step_mat(params.w_r, grads.params.w_r);
            step_mat(params.w_h, grads.params.w_h);
            step_mat(params.u_z, grads.params.u_z);
            step_mat(params.u_r, grads.params.u_r);
            step_mat(params.u_h, grads.params.u_h);
            step_mat(params.w_o, grads.params.w_o);
            auto step_vec = [&](std::vector<double>& b, const std::vector<double>& g) {
                for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * g[i];
            };
            step_vec(params.b_z, grads.params.b_z);
            step_vec(params.b_r, grads.params.b_r);
            step_vec(params.b_h, grads.params.b_h);
            step_vec(params.b_o, grads.params.b_o);
        }
        res.loss_trace.push_back(epoch_loss / static_cast<double>(batches));
    }
    res.params = std::move(params);
    return res;
}

/// |d output[target] / d input[t][c]| with dropout disabled.
inline AttributionMap saliency(const GruParameters& p,
                               const std::vector<std::vector<double>>& sequence,
                               std::size_t target_index,
                               const std::vector<std::string>& channel_names = {}) {
    if (target_index >= p.dims.output_dim)
        throw ModelError("saliency: target index out of range");
    auto fwd = gru_forward(p, sequence);
    std::vector<double> d_output(p.dims.output_dim, 0.0);
    d_output[target_index] = 1.0;
    GruGradients grads(p.dims);
    std::vector<std::vector<double>> input_grad;
    detail::gru_backward_one(p, sequence, fwd, d_output, nullptr, grads, input_grad);

    AttributionMap map;
    map.model_kind = "GRU";
    map.col_labels = channel_names;
    map.values.reserve(sequence.size());
    for (std::size_t t = 0; t < sequence.size(); ++t) {
        map.row_labels.push_back("step" + std::to_string(t + 1));
        std::vector<double> row(input_grad[t].size());
        for (std::size_t c = 0; c < row.size(); ++c)
            row[c] = std::abs(input_grad[t][c]);
        map.values.push_back(std::move(row));
    }
    return map;
}

// ---------------------------------------------------------------------------
// Checkpoint format: JSON with dims, seed, and nested weight arrays.
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json mat_to_json(const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < m.rows; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < m.cols; ++c)
            row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Mat mat_from_json(const nlohmann::json& j) {
    Mat m(j.size(), j.empty() ? 0 : j[0].size());
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c)
            m(r, c) = j[r][c].get<double>();
    return m;
}

} // namespace detail

inline void save_gru_checkpoint(const GruParameters& p, const std::string& path,
                                std::uint64_t seed = 0) {
    nlohmann::json j;
    j["format"] = "flucast-gru-checkpoint-v1";
    j["seed"] = seed;
    j["dims"] = {{"input", p.dims.input_dim},
                 {"hidden", p.dims.hidden_dim},
                 {"output", p.dims.output_dim}};
    j["w_z"] = detail::mat_to_json(p.w_z);
    j["w_r"] = detail::mat_to_json(p.w_r);
    j["w_h"] = detail::mat_to_json(p.w_h);
    j["u_z"] = detail::mat_to_json(p.u_z);
    j["u_r"] = detail::mat_to_json(p.u_r);
    j["u_h"] = detail::mat_to_json(p.u_h);
    j["w_o"] = detail::mat_to_json(p.w_o);
    j["b_z"] = p.b_z;
    j["b_r"] = p.b_r;
    j["b_h"] = p.b_h;
    j["b_o"] = p.b_o;
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write checkpoint " + path);
    out << j.dump(1) << "\n";
}

inline GruParameters load_gru_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open checkpoint " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "flucast-gru-checkpoint-v1")
        throw DataError("unrecognized checkpoint format in " + path);
    GruParameters p;
    p.dims.input_dim = j["dims"]["input"].get<std::size_t>();
    p.dims.hidden_dim = j["dims"]["hidden"].get<std::size_t>();
    p.dims.output_dim = j["dims"]["output"].get<std::size_t>();
    p.w_z = detail::mat_from_json(j["w_z"]);
    p.w_r = detail::mat_from_json(j["w_r"]);
    p.w_h = detail::mat_from_json(j["w_h"]);
    p.u_z = detail::mat_from_json(j["u_z"]);
    p.u_r = detail::mat_from_json(j["u_r"]);
    p.u_h = detail::mat_from_json(j["u_h"]);
    p.w_o = detail::mat_from_json(j["w_o"]);
    p.b_z = j["b_z"].get<std::vector<double>>();
    p.b_r = j["b_r"].get<std::vector<double>>();
    p.b_h = j["b_h"].get<std::vector<double>>();
    p.b_o = j["b_o"].get<std::vector<double>>();
    return p;
}

} // namespace flucast

#endif

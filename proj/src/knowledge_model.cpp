#include "wayfinder/knowledge_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace wayfinder {

namespace {

constexpr size_t kIn = kModelInputDim;
constexpr size_t kHid = kModelHiddenDim;
constexpr double kProbFloor = 1e-15;

double sigmoid_clamped(double z) {
    double s;
    if (z >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-z));
    } else {
        double e = std::exp(z);
        s = e / (1.0 + e);
    }
    if (s < kProbFloor) s = kProbFloor;
    if (s > 1.0 - kProbFloor) s = 1.0 - kProbFloor;
    return s;
}

}  // namespace

RerankerParams RerankerParams::zeros() {
    RerankerParams p;
    p.w1.assign(kIn * kHid, 0.0);
    p.b1.assign(kHid, 0.0);
    p.w2.assign(kHid * kHid, 0.0);
    p.b2.assign(kHid, 0.0);
    p.w3.assign(kHid, 0.0);
    p.b3 = 0.0;
    return p;
}

RerankerParams RerankerParams::he_uniform(uint64_t seed) {
    RerankerParams p = zeros();
    std::mt19937_64 rng(seed);
    auto fill = [&](std::vector<double>& w, size_t fan_in) {
        double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (double& x : w) {
            // [0,1) with 53 random bits, then scaled; avoids distribution
            // objects whose output is implementation-defined.
            double u = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
            x = (2.0 * u - 1.0) * limit;
        }
    };
    fill(p.w1, kIn);
    fill(p.w2, kHid);
    fill(p.w3, kHid);
    return p;
}

bool RerankerParams::bitwise_equal(const RerankerParams& o) const {
    auto eq = [](const std::vector<double>& a, const std::vector<double>& b) {
        return a.size() == b.size() &&
               std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
    };
    return eq(w1, o.w1) && eq(b1, o.b1) && eq(w2, o.w2) && eq(b2, o.b2) && eq(w3, o.w3) &&
           std::memcmp(&b3, &o.b3, sizeof(double)) == 0;
}

size_t RerankerParams::parameter_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + 1;
}

void Dataset::add(const double* x, uint8_t y) {
    inputs.insert(inputs.end(), x, x + kModelInputDim);
    labels.push_back(y);
    count++;
}

void Dataset::reserve(size_t n) {
    inputs.reserve(n * kModelInputDim);
    labels.reserve(n);
}

namespace {

// Per-example forward pass keeping intermediates for backprop.
struct Activations {
    std::vector<double> z1, h1, z2, h2;
    double z3 = 0.0, yhat = 0.5;

    Activations() : z1(kHid), h1(kHid), z2(kHid), h2(kHid) {}
};

void forward_into(const RerankerParams& p, const double* x, Activations& a) {
    std::copy(p.b1.begin(), p.b1.end(), a.z1.begin());
    for (size_t k = 0; k < kIn; ++k) {
        double xk = x[k];
        if (xk == 0.0) continue;
        const double* wrow = p.w1.data() + k * kHid;
        double* z = a.z1.data();
        for (size_t j = 0; j < kHid; ++j) z[j] += xk * wrow[j];
    }
    for (size_t j = 0; j < kHid; ++j) a.h1[j] = a.z1[j] > 0.0 ? a.z1[j] : 0.0;

    std::copy(p.b2.begin(), p.b2.end(), a.z2.begin());
    for (size_t k = 0; k < kHid; ++k) {
        double hk = a.h1[k];
        if (hk == 0.0) continue;
        const double* wrow = p.w2.data() + k * kHid;
        double* z = a.z2.data();
        for (size_t j = 0; j < kHid; ++j) z[j] += hk * wrow[j];
    }
    for (size_t j = 0; j < kHid; ++j) a.h2[j] = a.z2[j] > 0.0 ? a.z2[j] : 0.0;

    double z3 = p.b3;
    for (size_t k = 0; k < kHid; ++k) z3 += a.h2[k] * p.w3[k];
    a.z3 = z3;
    a.yhat = sigmoid_clamped(z3);
}

struct Gradients {
    std::vector<double> w1, b1, w2, b2, w3;
    double b3 = 0.0;

    Gradients()
        : w1(kIn * kHid, 0.0), b1(kHid, 0.0), w2(kHid * kHid, 0.0), b2(kHid, 0.0),
          w3(kHid, 0.0) {}

    void zero() {
        std::fill(w1.begin(), w1.end(), 0.0);
        std::fill(b1.begin(), b1.end(), 0.0);
        std::fill(w2.begin(), w2.end(), 0.0);
        std::fill(b2.begin(), b2.end(), 0.0);
        std::fill(w3.begin(), w3.end(), 0.0);
        b3 = 0.0;
    }
};

// Accumulates the gradient of (1/B) * sum BCE for one example; dz3 carries
// the 1/B factor.
void backward_accumulate(const RerankerParams& p, const double* x, const Activations& a,
                         double dz3, Gradients& g) {
    g.b3 += dz3;
    std::vector<double> dz2(kHid);
    for (size_t k = 0; k < kHid; ++k) {
        g.w3[k] += a.h2[k] * dz3;
        double dh2 = p.w3[k] * dz3;
        dz2[k] = a.z2[k] > 0.0 ? dh2 : 0.0;
    }

    std::vector<double> dh1(kHid, 0.0);
    for (size_t k = 0; k < kHid; ++k) {
        double hk = a.h1[k];
        const double* wrow = p.w2.data() + k * kHid;
        double* grow = g.w2.data() + k * kHid;
        double acc = 0.0;
        for (size_t j = 0; j < kHid; ++j) {
            grow[j] += hk * dz2[j];
            acc += wrow[j] * dz2[j];
        }
        dh1[k] = acc;
    }
    for (size_t j = 0; j < kHid; ++j) g.b2[j] += dz2[j];

    std::vector<double> dz1(kHid);
    for (size_t k = 0; k < kHid; ++k) dz1[k] = a.z1[k] > 0.0 ? dh1[k] : 0.0;
    for (size_t j = 0; j < kHid; ++j) g.b1[j] += dz1[j];
    for (size_t k = 0; k < kIn; ++k) {
        double xk = x[k];
        if (xk == 0.0) continue;
        double* grow = g.w1.data() + k * kHid;
        const double* dz = dz1.data();
        for (size_t j = 0; j < kHid; ++j) grow[j] += xk * dz[j];
    }
}

double example_bce(double yhat, uint8_t y) {
    double p1 = std::max(yhat, 1e-12);
    double p0 = std::max(1.0 - yhat, 1e-12);
    return y ? -std::log(p1) : -std::log(p0);
}

}  // namespace

double km_forward(const RerankerParams& p, const double* x) {
    static thread_local Activations a;
    forward_into(p, x, a);
    return a.yhat;
}

double km_forward(const RerankerParams& p, const std::vector<double>& x) {
    if (x.size() != kModelInputDim)
        throw std::invalid_argument("km_forward: input has " + std::to_string(x.size()) +
                                    " dims, expected " + std::to_string(kModelInputDim));
    return km_forward(p, x.data());
}

double bce_loss(const std::vector<double>& predictions, const std::vector<uint8_t>& labels) {
    if (predictions.size() != labels.size() || predictions.empty())
        throw std::invalid_argument("bce_loss: predictions and labels must align and be non-empty");
    double sum = 0.0;
    for (size_t i = 0; i < predictions.size(); ++i) sum += example_bce(predictions[i], labels[i]);
    return sum / static_cast<double>(predictions.size());
}

void shuffle_indices(std::vector<size_t>& idx, uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (size_t i = idx.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
}

TrainResult train(const Dataset& data, const TrainConfig& config) {
    if (data.count == 0) throw std::invalid_argument("train: empty dataset");
    if (config.epochs <= 0 || config.batch_size <= 0 || config.learning_rate <= 0.0)
        throw std::invalid_argument("train: epochs, batch size and learning rate must be positive");

    TrainResult result;
    result.params = RerankerParams::he_uniform(config.seed);
    RerankerParams& p = result.params;

    std::vector<size_t> order(data.count);
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    Activations acts;
    Gradients grads;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_indices(order, config.seed + 0x9E3779B97F4A7C15ULL * (epoch + 1));

        double loss_sum = 0.0;
        long correct = 0;
        size_t cursor = 0;
        while (cursor < data.count) {
            size_t bs = std::min<size_t>(config.batch_size, data.count - cursor);
            grads.zero();
            for (size_t i = 0; i < bs; ++i) {
                const double* x = data.row(order[cursor + i]);
                uint8_t y = data.labels[order[cursor + i]];
                forward_into(p, x, acts);
                loss_sum += example_bce(acts.yhat, y);
                if ((acts.yhat >= 0.5 ? 1 : 0) == y) correct++;
                double dz3 = (acts.yhat - static_cast<double>(y)) / static_cast<double>(bs);
                backward_accumulate(p, x, acts, dz3, grads);
            }
            double lr = config.learning_rate;
            for (size_t i = 0; i < p.w1.size(); ++i) p.w1[i] -= lr * grads.w1[i];
            for (size_t i = 0; i < p.b1.size(); ++i) p.b1[i] -= lr * grads.b1[i];
            for (size_t i = 0; i < p.w2.size(); ++i) p.w2[i] -= lr * grads.w2[i];
            for (size_t i = 0; i < p.b2.size(); ++i) p.b2[i] -= lr * grads.b2[i];
            for (size_t i = 0; i < p.w3.size(); ++i) p.w3[i] -= lr * grads.w3[i];
            p.b3 -= lr * grads.b3;
            cursor += bs;
        }
        EpochMetrics m;
        m.loss = loss_sum / static_cast<double>(data.count);
        m.accuracy = static_cast<double>(correct) / static_cast<double>(data.count);
        result.epochs.push_back(m);
    }
    return result;
}

EvalMetrics evaluate(const RerankerParams& p, const Dataset& data) {
    EvalMetrics m;
    Activations a;
    for (size_t i = 0; i < data.count; ++i) {
        forward_into(p, data.row(i), a);
        bool pred = a.yhat >= 0.5;
        bool truth = data.labels[i] != 0;
        if (pred && truth) m.tp++;
        else if (pred && !truth) m.fp++;
        else if (!pred && truth) m.fn++;
        else m.tn++;
    }
    long total = m.tp + m.fp + m.tn + m.fn;
    m.accuracy = total ? static_cast<double>(m.tp + m.tn) / total : 0.0;
    long denom = 2 * m.tp + m.fp + m.fn;
    m.f1 = denom ? 2.0 * m.tp / static_cast<double>(denom) : 0.0;
    return m;
}

namespace {

double batch_mean_loss(const RerankerParams& p, const Dataset& batch) {
    Activations a;
    double sum = 0.0;
    for (size_t i = 0; i < batch.count; ++i) {
        forward_into(p, batch.row(i), a);
        sum += example_bce(a.yhat, batch.labels[i]);
    }
    return sum / static_cast<double>(batch.count);
}

}  // namespace

GradCheckReport gradient_check(const RerankerParams& p, const Dataset& batch, uint64_t seed,
                               double h, int coords_per_tensor) {
    if (batch.count == 0) throw std::invalid_argument("gradient_check: empty batch");

    // Analytic gradient of the mean loss over the batch.
    Gradients analytic;
    Activations a;
    for (size_t i = 0; i < batch.count; ++i) {
        const double* x = batch.row(i);
        forward_into(p, x, a);
        double dz3 = (a.yhat - static_cast<double>(batch.labels[i])) /
                     static_cast<double>(batch.count);
        backward_accumulate(p, x, a, dz3, analytic);
    }

    RerankerParams probe = p;
    GradCheckReport report;
    std::mt19937_64 rng(seed);

    auto check_tensor = [&](std::vector<double>& tensor, const std::vector<double>& grad) {
        size_t n = tensor.size();
        std::vector<size_t> coords;
        if (static_cast<int>(n) <= coords_per_tensor) {
            for (size_t i = 0; i < n; ++i) coords.push_back(i);
        } else {
            std::vector<size_t> all(n);
            for (size_t i = 0; i < n; ++i) all[i] = i;
            for (int i = 0; i < coords_per_tensor; ++i) {
                size_t j = i + static_cast<size_t>(rng() % (n - i));
                std::swap(all[i], all[j]);
                coords.push_back(all[i]);
            }
        }
        for (size_t c : coords) {
            double saved = tensor[c];
            tensor[c] = saved + h;
            double lp = batch_mean_loss(probe, batch);
            tensor[c] = saved - h;
            double lm = batch_mean_loss(probe, batch);
            tensor[c] = saved;
            double numeric = (lp - lm) / (2.0 * h);
            double an = grad[c];
            double scale = std::max(std::fabs(an), std::fabs(numeric));
            if (scale < 1e-10) {
                report.skipped++;
                continue;
            }
            double rel = std::fabs(an - numeric) / scale;
            report.max_rel_error = std::max(report.max_rel_error, rel);
            report.checked++;
        }
    };

    check_tensor(probe.w1, analytic.w1);
    check_tensor(probe.b1, analytic.b1);
    check_tensor(probe.w2, analytic.w2);
    check_tensor(probe.b2, analytic.b2);
    check_tensor(probe.w3, analytic.w3);
    {
        double saved = probe.b3;
        probe.b3 = saved + h;
        double lp = batch_mean_loss(probe, batch);
        probe.b3 = saved - h;
        double lm = batch_mean_loss(probe, batch);
        probe.b3 = saved;
        double numeric = (lp - lm) / (2.0 * h);
        double scale = std::max(std::fabs(analytic.b3), std::fabs(numeric));
        if (scale < 1e-10) {
            report.skipped++;
        } else {
            report.max_rel_error =
                std::max(report.max_rel_error, std::fabs(analytic.b3 - numeric) / scale);
            report.checked++;
        }
    }
    return report;
}

// ====== model file ======

namespace {
constexpr char kMagic[4] = {'W', 'F', 'K', 'M'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v, const std::string& path) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error(path + ": truncated model file");
}

}  // namespace

void save_model(const std::string& path, const RerankerParams& p, const TrainConfig& config,
                const std::string& metrics_json) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out.write(kMagic, 4);
    write_pod(out, kVersion);
    write_pod(out, static_cast<uint32_t>(kIn));
    write_pod(out, static_cast<uint32_t>(kHid));
    write_pod(out, config.seed);
    write_pod(out, static_cast<uint32_t>(config.epochs));
    write_pod(out, static_cast<uint32_t>(config.batch_size));
    write_pod(out, config.learning_rate);
    write_pod(out, static_cast<uint32_t>(metrics_json.size()));
    out.write(metrics_json.data(), metrics_json.size());
    auto dump = [&](const std::vector<double>& v) {
        out.write(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    };
    dump(p.w1);
    dump(p.b1);
    dump(p.w2);
    dump(p.b2);
    dump(p.w3);
    write_pod(out, p.b3);
    if (!out) throw std::runtime_error(path + ": write failed");
}

ModelFile load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error(path + ": not a model file (bad magic)");
    uint32_t version, in_dim, hid_dim;
    read_pod(in, version, path);
    if (version != kVersion)
        throw std::runtime_error(path + ": unsupported model version " + std::to_string(version));
    read_pod(in, in_dim, path);
    read_pod(in, hid_dim, path);
    if (in_dim != kIn || hid_dim != kHid)
        throw std::runtime_error(path + ": shape mismatch (" + std::to_string(in_dim) + "x" +
                                 std::to_string(hid_dim) + ")");
    ModelFile m;
    uint32_t epochs, batch;
    read_pod(in, m.config.seed, path);
    read_pod(in, epochs, path);
    read_pod(in, batch, path);
    read_pod(in, m.config.learning_rate, path);
    m.config.epochs = static_cast<int>(epochs);
    m.config.batch_size = static_cast<int>(batch);
    uint32_t metrics_len;
    read_pod(in, metrics_len, path);
    m.metrics_json.resize(metrics_len);
    if (metrics_len) {
        in.read(m.metrics_json.data(), metrics_len);
        if (!in) throw std::runtime_error(path + ": truncated model file");
    }
    m.params = RerankerParams::zeros();
    auto slurp = [&](std::vector<double>& v) {
        in.read(reinterpret_cast<char*>(v.data()), v.size() * sizeof(double));
        if (!in) throw std::runtime_error(path + ": truncated model file");
    };
    slurp(m.params.w1);
    slurp(m.params.b1);
    slurp(m.params.w2);
    slurp(m.params.b2);
    slurp(m.params.w3);
    read_pod(in, m.params.b3, path);
    return m;
}

void split_dataset(const Dataset& all, uint64_t seed, Dataset& train_out, Dataset& eval_out) {
    std::vector<size_t> order(all.count);
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_indices(order, seed);
    size_t n_train = (all.count * 8) / 10;
    train_out = Dataset{};
    eval_out = Dataset{};
    train_out.reserve(n_train);
    eval_out.reserve(all.count - n_train);
    for (size_t i = 0; i < order.size(); ++i) {
        (i < n_train ? train_out : eval_out).add(all.row(order[i]), all.labels[order[i]]);
    }
}

}  // namespace wayfinder

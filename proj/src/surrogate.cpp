#include "mlporo/surrogate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "mlporo/kernels.hpp"

namespace mlporo::ann {

namespace {

using json = nlohmann::ordered_json;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

double normalize_input(double x, const InputRange& r) {
    const double range = std::max(r.hi - r.lo, 1e-12);
    return (x - r.lo) / range;
}

void check_inside(double x, const InputRange& r, const char* name) {
    const double margin = 0.05 * std::max(r.hi - r.lo, 1e-12);
    if (x < r.lo - margin || x > r.hi + margin) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "input %s=%.6g lies outside the trained range "
                      "[%.6g, %.6g] by more than 5%%",
                      name, x, r.lo, r.hi);
        throw std::domain_error(buf);
    }
}

// Forward pass for one sample; scratch vectors supplied by the caller so
// batch loops reuse them.
double forward(const std::vector<Layer>& layers, double x0, double x1,
               std::vector<double>& a, std::vector<double>& z) {
    a.assign({x0, x1});
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Layer& L = layers[l];
        z.resize(L.rows);
        for (int k = 0; k < L.rows; ++k) {
            z[k] = L.b[k] +
                   kern::dot(L.cols, L.w.data() + std::size_t(k) * L.cols,
                             a.data());
        }
        if (l + 1 < layers.size()) {
            a.resize(L.rows);
            kern::relu(L.rows, z.data(), a.data());
        } else {
            a = z;  // linear output layer
        }
    }
    return a[0];
}

struct Split {
    std::vector<int> train, valid;
};

Split make_split(int n, double valid_fraction, std::uint64_t seed) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const int n_valid = std::max(1, int(n * valid_fraction));
    Split s;
    s.valid.assign(idx.begin(), idx.begin() + n_valid);
    s.train.assign(idx.begin() + n_valid, idx.end());
    return s;
}

// Adam state per layer.
struct Moments {
    std::vector<double> mw, vw, mb, vb;
};

struct Net {
    std::vector<Layer> layers;
    std::vector<Moments> mom;
};

Net init_net(int width, int depth, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Net net;
    std::vector<int> dims{2};
    for (int l = 0; l < depth; ++l) dims.push_back(width);
    dims.push_back(1);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        layer.cols = dims[l];
        layer.rows = dims[l + 1];
        const double lim = std::sqrt(6.0 / layer.cols);  // rectifier-friendly
        std::uniform_real_distribution<double> U(-lim, lim);
        layer.w.resize(std::size_t(layer.rows) * layer.cols);
        for (double& w : layer.w) w = U(rng);
        layer.b.assign(layer.rows, 0.0);
        Moments m;
        m.mw.assign(layer.w.size(), 0.0);
        m.vw.assign(layer.w.size(), 0.0);
        m.mb.assign(layer.b.size(), 0.0);
        m.vb.assign(layer.b.size(), 0.0);
        net.layers.push_back(std::move(layer));
        net.mom.push_back(std::move(m));
    }
    return net;
}

// Full-batch MSE over normalized targets, without touching Adam state.
double batch_mse(const std::vector<Layer>& layers,
                 const std::vector<double>& xn, const std::vector<int>& idx,
                 const std::vector<double>& yn) {
    std::vector<double> a, z;
    double acc = 0.0;
    for (const int s : idx) {
        const double p = forward(layers, xn[2 * s], xn[2 * s + 1], a, z);
        const double e = p - yn[s];
        acc += e * e;
    }
    return acc / double(idx.size());
}

double rel_l2(const Mlp& mlp, const std::vector<double>& xn,
              const std::vector<int>& idx, const std::vector<double>& y) {
    std::vector<double> a, z;
    double num = 0.0, den = 0.0;
    for (const int s : idx) {
        const double pn = forward(mlp.layers, xn[2 * s], xn[2 * s + 1], a, z);
        const double p = pn * mlp.target.stdev + mlp.target.mean;
        num += (p - y[s]) * (p - y[s]);
        den += y[s] * y[s];
    }
    return std::sqrt(num / std::max(den, 1e-300));
}

// Trains one output head. xn holds normalized inputs for all rows
// (sample-major pairs); y holds raw targets.
OutputRecord train_one(const std::string& name, const std::vector<double>& xn,
                       const std::vector<double>& y, const Split& split,
                       const std::array<InputRange, 2>& in_ranges,
                       const TrainConfig& cfg) {
    const int width = cfg.hidden_width > 0 ? cfg.hidden_width
                                           : reference_width(name);
    Net net = init_net(width, cfg.hidden_layers, cfg.seed ^ fnv1a(name));

    // standardize targets on the training split
    double mean = 0.0;
    for (const int s : split.train) mean += y[s];
    mean /= double(split.train.size());
    double var = 0.0;
    for (const int s : split.train) var += (y[s] - mean) * (y[s] - mean);
    var /= double(split.train.size());
    TargetNorm tn;
    tn.mean = mean;
    tn.stdev = var > 1e-30 ? std::sqrt(var) : 1.0;
    std::vector<double> yn(y.size(), 0.0);
    for (std::size_t s = 0; s < y.size(); ++s) {
        yn[s] = (y[s] - tn.mean) / tn.stdev;
    }

    // a constant target has a closed-form optimum: zero weights and the
    // (denormalized) mean as output; iterating toward it is wasted work
    if (var <= 1e-30) {
        for (auto& L : net.layers) {
            std::fill(L.w.begin(), L.w.end(), 0.0);
            std::fill(L.b.begin(), L.b.end(), 0.0);
        }
        OutputRecord rec;
        rec.name = name;
        rec.net.layers = std::move(net.layers);
        rec.net.in = in_ranges;
        rec.net.target = tn;
        rec.epochs = 0;
        rec.train_rel_l2 = rel_l2(rec.net, xn, split.train, y);
        rec.valid_rel_l2 = rel_l2(rec.net, xn, split.valid, y);
        rec.gate_passed = rec.valid_rel_l2 <= cfg.gate;
        return rec;
    }

    const int n_layers = int(net.layers.size());
    const double inv_batch = 1.0 / double(split.train.size());

    // per-layer batch scratch: pre-activations and activations per sample
    std::vector<double> a, z;
    std::vector<std::vector<double>> zs(n_layers), as(n_layers + 1);
    std::vector<std::vector<double>> dW(n_layers), db(n_layers), delta(n_layers);
    for (int l = 0; l < n_layers; ++l) {
        dW[l].resize(net.layers[l].w.size());
        db[l].resize(net.layers[l].b.size());
        delta[l].resize(net.layers[l].rows);
        zs[l].resize(net.layers[l].rows);
        as[l + 1].resize(net.layers[l].rows);
    }
    as[0].resize(2);

    double best_valid = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    std::vector<Layer> best_layers = net.layers;
    // fixed-step Adam dances around an exact fit at the step scale, so the
    // rate halves whenever validation goes a quarter patience window without
    // improving by at least 1% (marginal dance dips do not count)
    double lr = cfg.learning_rate;
    const int stall_window = std::max(1, cfg.patience / 4);
    double decay_ref = std::numeric_limits<double>::infinity();
    int sig_epoch = 0;
    int last_decay_epoch = 0;
    int epoch = 0;
    for (; epoch < cfg.max_epochs; ++epoch) {
        for (int l = 0; l < n_layers; ++l) {
            std::fill(dW[l].begin(), dW[l].end(), 0.0);
            std::fill(db[l].begin(), db[l].end(), 0.0);
        }
        double loss = 0.0;
        for (const int s : split.train) {
            as[0][0] = xn[2 * s];
            as[0][1] = xn[2 * s + 1];
            for (int l = 0; l < n_layers; ++l) {
                const Layer& L = net.layers[l];
                for (int k = 0; k < L.rows; ++k) {
                    zs[l][k] =
                        L.b[k] + kern::dot(L.cols,
                                           L.w.data() + std::size_t(k) * L.cols,
                                           as[l].data());
                }
                if (l + 1 < n_layers) {
                    kern::relu(L.rows, zs[l].data(), as[l + 1].data());
                } else {
                    as[l + 1] = zs[l];
                }
            }
            const double err = as[n_layers][0] - yn[s];
            loss += err * err;

            // backprop: linear output layer, rectifier masks inside
            delta[n_layers - 1][0] = 2.0 * err * inv_batch;
            for (int l = n_layers - 1; l >= 0; --l) {
                const Layer& L = net.layers[l];
                for (int k = 0; k < L.rows; ++k) {
                    const double g = delta[l][k];
                    if (g == 0.0) continue;
                    kern::axpy(L.cols, g, as[l].data(),
                               dW[l].data() + std::size_t(k) * L.cols);
                    db[l][k] += g;
                }
                if (l == 0) break;
                std::fill(delta[l - 1].begin(), delta[l - 1].end(), 0.0);
                for (int k = 0; k < L.rows; ++k) {
                    const double g = delta[l][k];
                    if (g == 0.0) continue;
                    kern::axpy(L.cols, g,
                               L.w.data() + std::size_t(k) * L.cols,
                               delta[l - 1].data());
                }
                kern::relu_mask(net.layers[l - 1].rows, zs[l - 1].data(),
                                delta[l - 1].data());
            }
        }
        loss *= inv_batch;
        if (!std::isfinite(loss)) {
            char buf[128];
            std::snprintf(buf, sizeof(buf),
                          "non-finite loss for %s at epoch %d "
                          "(learning rate %.3g)",
                          name.c_str(), epoch, lr);
            throw std::runtime_error(buf);
        }

        const double inv_b1 = 1.0 / (1.0 - std::pow(cfg.beta1, epoch + 1));
        const double inv_b2 = 1.0 / (1.0 - std::pow(cfg.beta2, epoch + 1));
        for (int l = 0; l < n_layers; ++l) {
            Layer& L = net.layers[l];
            Moments& m = net.mom[l];
            kern::adam_step(L.w.size(), L.w.data(), dW[l].data(), m.mw.data(),
                            m.vw.data(), lr, cfg.beta1, cfg.beta2, cfg.epsilon,
                            inv_b1, inv_b2);
            kern::adam_step(L.b.size(), L.b.data(), db[l].data(), m.mb.data(),
                            m.vb.data(), lr, cfg.beta1, cfg.beta2, cfg.epsilon,
                            inv_b1, inv_b2);
        }

        const double vmse = batch_mse(net.layers, xn, split.valid, yn);
        if (vmse < best_valid * (1.0 - 1e-12)) {
            best_valid = vmse;
            best_epoch = epoch;
            best_layers = net.layers;
        } else if (epoch - best_epoch >= cfg.patience) {
            ++epoch;
            break;
        }
        if (vmse < decay_ref * 0.99) {
            decay_ref = vmse;
            sig_epoch = epoch;
        } else if (epoch - std::max(sig_epoch, last_decay_epoch) >=
                       stall_window &&
                   lr > 1e-8) {
            lr *= 0.5;
            last_decay_epoch = epoch;
        }
    }

    OutputRecord rec;
    rec.name = name;
    rec.net.layers = std::move(best_layers);
    rec.net.in = in_ranges;
    rec.net.target = tn;
    rec.epochs = epoch;
    rec.train_rel_l2 = rel_l2(rec.net, xn, split.train, y);
    rec.valid_rel_l2 = rel_l2(rec.net, xn, split.valid, y);
    rec.gate_passed = rec.valid_rel_l2 <= cfg.gate;
    return rec;
}

json layer_to_json(const Layer& L) {
    json j;
    j["rows"] = L.rows;
    j["cols"] = L.cols;
    j["w"] = L.w;
    j["b"] = L.b;
    return j;
}

Layer layer_from_json(const json& j) {
    Layer L;
    L.rows = j.at("rows").get<int>();
    L.cols = j.at("cols").get<int>();
    L.w = j.at("w").get<std::vector<double>>();
    L.b = j.at("b").get<std::vector<double>>();
    if (L.rows <= 0 || L.cols <= 0 ||
        L.w.size() != std::size_t(L.rows) * L.cols ||
        L.b.size() != std::size_t(L.rows)) {
        throw std::runtime_error("weight file: layer dimension mismatch");
    }
    return L;
}

}  // namespace

int reference_width(const std::string& name) {
    if (name == "M11" || name == "M12" || name == "Q11") return 50;
    if (name == "M44") return 20;
    if (name == "K11") return 10;
    throw std::invalid_argument("unknown surrogate output: " + name);
}

double Mlp::eval(double nu, double phi) const {
    check_inside(nu, in[0], "nu");
    check_inside(phi, in[1], "phi");
    std::vector<double> a, z;
    const double pn = forward(layers, normalize_input(nu, in[0]),
                              normalize_input(phi, in[1]), a, z);
    return pn * target.stdev + target.mean;
}

const OutputRecord& SurrogateBundle::output(const std::string& name) const {
    for (const auto& rec : outputs) {
        if (rec.name == name) return rec;
    }
    throw std::invalid_argument("bundle lacks surrogate output: " + name);
}

cell::CellTensors SurrogateBundle::evaluate(double nu, double phi) const {
    cell::CellTensors t;
    t.M11 = output("M11").net.eval(nu, phi);
    t.M12 = output("M12").net.eval(nu, phi);
    t.M44 = output("M44").net.eval(nu, phi);
    t.Q11 = output("Q11").net.eval(nu, phi);
    t.K11 = output("K11").net.eval(nu, phi);
    return t;
}

bool SurrogateBundle::all_gates_passed() const {
    for (const auto& rec : outputs) {
        if (!rec.gate_passed) return false;
    }
    return outputs.size() == kOutputNames.size();
}

SurrogateBundle train(const std::vector<cell::DatasetRow>& rows,
                      const TrainConfig& cfg, std::ostream* progress) {
    if (rows.size() < 100) {
        throw std::invalid_argument("training needs at least 100 dataset rows");
    }
    if (!(cfg.valid_fraction > 0.0 && cfg.valid_fraction < 1.0)) {
        throw std::invalid_argument("validation fraction must lie in (0, 1)");
    }
    const int n = int(rows.size());

    std::array<InputRange, 2> ranges;
    ranges[0] = {rows[0].nu, rows[0].nu};
    ranges[1] = {rows[0].phi, rows[0].phi};
    for (const auto& r : rows) {
        ranges[0].lo = std::min(ranges[0].lo, r.nu);
        ranges[0].hi = std::max(ranges[0].hi, r.nu);
        ranges[1].lo = std::min(ranges[1].lo, r.phi);
        ranges[1].hi = std::max(ranges[1].hi, r.phi);
    }
    std::vector<double> xn(2 * rows.size());
    for (int s = 0; s < n; ++s) {
        xn[2 * s] = normalize_input(rows[s].nu, ranges[0]);
        xn[2 * s + 1] = normalize_input(rows[s].phi, ranges[1]);
    }
    std::array<std::vector<double>, 5> targets;
    for (auto& t : targets) t.resize(rows.size());
    for (int s = 0; s < n; ++s) {
        targets[0][s] = rows[s].M11;
        targets[1][s] = rows[s].M12;
        targets[2][s] = rows[s].M44;
        targets[3][s] = rows[s].Q11;
        targets[4][s] = rows[s].K11;
    }
    const Split split = make_split(n, cfg.valid_fraction, cfg.seed);

    SurrogateBundle bundle;
    bundle.outputs.resize(kOutputNames.size());
    bundle.meta.seed = cfg.seed;
    bundle.meta.rows = n;
    bundle.meta.nu_min = ranges[0].lo;
    bundle.meta.nu_max = ranges[0].hi;
    bundle.meta.phi_min = ranges[1].lo;
    bundle.meta.phi_max = ranges[1].hi;
    bundle.meta.isa = kern::isa_name(kern::active_isa());

    std::mutex progress_mutex;
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= kOutputNames.size()) return;
            try {
                auto rec = train_one(kOutputNames[i], xn, targets[i], split,
                                     ranges, cfg);
                if (progress) {
                    const std::scoped_lock lock(progress_mutex);
                    (*progress)
                        << "[train] " << rec.name << " epochs " << rec.epochs
                        << " valid rel L2 " << rec.valid_rel_l2 << "\n";
                }
                bundle.outputs[i] = std::move(rec);
            } catch (...) {
                const std::scoped_lock lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    const int jobs = std::max(1, std::min(cfg.jobs, int(kOutputNames.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    if (cfg.enforce_gate) {
        for (const auto& rec : bundle.outputs) {
            if (!rec.gate_passed) {
                char buf[160];
                std::snprintf(buf, sizeof(buf),
                              "surrogate %s missed the %.3g validation gate: "
                              "best achieved %.4g after %d epochs",
                              rec.name.c_str(), cfg.gate, rec.valid_rel_l2,
                              rec.epochs);
                throw std::runtime_error(buf);
            }
        }
    }
    return bundle;
}

void save_bundle(const SurrogateBundle& bundle, const std::string& path) {
    json root;
    root["version"] = 1;
    json meta;
    meta["seed"] = bundle.meta.seed;
    meta["rows"] = bundle.meta.rows;
    meta["nu_min"] = bundle.meta.nu_min;
    meta["nu_max"] = bundle.meta.nu_max;
    meta["phi_min"] = bundle.meta.phi_min;
    meta["phi_max"] = bundle.meta.phi_max;
    meta["isa"] = bundle.meta.isa;
    root["metadata"] = meta;
    root["outputs"] = json::array();
    for (const auto& rec : bundle.outputs) {
        json o;
        o["name"] = rec.name;
        json widths = json::array();
        for (std::size_t l = 0; l + 1 < rec.net.layers.size(); ++l) {
            widths.push_back(rec.net.layers[l].rows);
        }
        o["widths"] = widths;
        o["input_norm"] = json::array(
            {{{"lo", rec.net.in[0].lo}, {"hi", rec.net.in[0].hi}},
             {{"lo", rec.net.in[1].lo}, {"hi", rec.net.in[1].hi}}});
        o["target_norm"] = {{"mean", rec.net.target.mean},
                            {"stdev", rec.net.target.stdev}};
        o["layers"] = json::array();
        for (const auto& L : rec.net.layers) o["layers"].push_back(layer_to_json(L));
        o["train_rel_l2"] = rec.train_rel_l2;
        o["valid_rel_l2"] = rec.valid_rel_l2;
        o["epochs"] = rec.epochs;
        o["gate_passed"] = rec.gate_passed;
        root["outputs"].push_back(std::move(o));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write weight file: " + path);
    out << root.dump(2) << "\n";
    if (!out) throw std::runtime_error("failed writing weight file: " + path);
}

SurrogateBundle load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open weight file: " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw std::runtime_error("weight file parse error in " + path + ": " +
                                 e.what());
    }
    try {
        if (root.at("version").get<int>() != 1) {
            throw std::runtime_error("unsupported weight file version");
        }
        SurrogateBundle bundle;
        const json& meta = root.at("metadata");
        bundle.meta.seed = meta.at("seed").get<std::uint64_t>();
        bundle.meta.rows = meta.at("rows").get<int>();
        bundle.meta.nu_min = meta.at("nu_min").get<double>();
        bundle.meta.nu_max = meta.at("nu_max").get<double>();
        bundle.meta.phi_min = meta.at("phi_min").get<double>();
        bundle.meta.phi_max = meta.at("phi_max").get<double>();
        bundle.meta.isa = meta.at("isa").get<std::string>();
        for (const json& o : root.at("outputs")) {
            OutputRecord rec;
            rec.name = o.at("name").get<std::string>();
            rec.net.in[0].lo = o.at("input_norm").at(0).at("lo").get<double>();
            rec.net.in[0].hi = o.at("input_norm").at(0).at("hi").get<double>();
            rec.net.in[1].lo = o.at("input_norm").at(1).at("lo").get<double>();
            rec.net.in[1].hi = o.at("input_norm").at(1).at("hi").get<double>();
            rec.net.target.mean = o.at("target_norm").at("mean").get<double>();
            rec.net.target.stdev = o.at("target_norm").at("stdev").get<double>();
            for (const json& jl : o.at("layers")) {
                rec.net.layers.push_back(layer_from_json(jl));
            }
            if (rec.net.layers.empty() || rec.net.layers.front().cols != 2 ||
                rec.net.layers.back().rows != 1) {
                throw std::runtime_error(
                    "weight file: network must map 2 inputs to 1 output");
            }
            for (std::size_t l = 0; l + 1 < rec.net.layers.size(); ++l) {
                if (rec.net.layers[l].rows != rec.net.layers[l + 1].cols) {
                    throw std::runtime_error(
                        "weight file: layer dimensions do not chain");
                }
            }
            rec.train_rel_l2 = o.at("train_rel_l2").get<double>();
            rec.valid_rel_l2 = o.at("valid_rel_l2").get<double>();
            rec.epochs = o.at("epochs").get<int>();
            rec.gate_passed = o.at("gate_passed").get<bool>();
            bundle.outputs.push_back(std::move(rec));
        }
        return bundle;
    } catch (const json::exception& e) {
        throw std::runtime_error("weight file structure error in " + path +
                                 ": " + e.what());
    }
}

}  // namespace mlporo::ann

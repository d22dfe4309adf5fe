#include "micro_model.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include <json.hpp>

#include "bytes.hpp"
#include "dump.hpp"
#include "rng.hpp"

namespace avar {

namespace {

using nlohmann::json;

// c[n x p] = a[n x m] * b[m x p], row-major, overwrite.
void mm(const double* a, const double* b, double* c, int n, int m, int p) {
    for (int i = 0; i < n; ++i) {
        double* ci = c + static_cast<size_t>(i) * p;
        for (int j = 0; j < p; ++j) ci[j] = 0.0;
        const double* ai = a + static_cast<size_t>(i) * m;
        for (int k = 0; k < m; ++k) {
            const double aik = ai[k];
            const double* bk = b + static_cast<size_t>(k) * p;
            for (int j = 0; j < p; ++j) ci[j] += aik * bk[j];
        }
    }
}

// c[m x p] += a[n x m]^T * b[n x p]; the weight-gradient shape.
void mm_at_b_acc(const double* a, const double* b, double* c, int n, int m, int p) {
    for (int i = 0; i < n; ++i) {
        const double* ai = a + static_cast<size_t>(i) * m;
        const double* bi = b + static_cast<size_t>(i) * p;
        for (int k = 0; k < m; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            double* ck = c + static_cast<size_t>(k) * p;
            for (int j = 0; j < p; ++j) ck[j] += aik * bi[j];
        }
    }
}

// c[n x m] += a[n x p] * b[m x p]^T; the input-gradient shape.
void mm_a_bt_acc(const double* a, const double* b, double* c, int n, int p, int m) {
    for (int i = 0; i < n; ++i) {
        const double* ai = a + static_cast<size_t>(i) * p;
        double* ci = c + static_cast<size_t>(i) * m;
        for (int k = 0; k < m; ++k) {
            const double* bk = b + static_cast<size_t>(k) * p;
            double acc = 0.0;
            for (int j = 0; j < p; ++j) acc += ai[j] * bk[j];
            ci[k] += acc;
        }
    }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_deriv(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

json config_json(const ModelConfig& c) {
    return {{"vocab_size", c.vocab_size},
            {"image_vocab_size", c.image_vocab_size},
            {"d_model", c.d_model},
            {"n_layers", c.n_layers},
            {"n_heads", c.n_heads},
            {"max_seq_len", c.max_seq_len},
            {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.vocab_size = j.at("vocab_size").get<int>();
    c.image_vocab_size = j.at("image_vocab_size").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

}  // namespace

ValidationResult validate_config(const ModelConfig& cfg) {
    if (cfg.vocab_size < 1 || cfg.image_vocab_size < 1 || cfg.d_model < 1 ||
        cfg.n_layers < 1 || cfg.n_heads < 1 || cfg.max_seq_len < 1)
        return ValidationResult::fail(Errc::invalid_config, "all model dimensions must be >= 1");
    if (cfg.d_model % cfg.n_heads != 0)
        return ValidationResult::fail(Errc::invalid_config,
                                      "d_model must be divisible by n_heads");
    return ValidationResult::valid();
}

ParamLayout make_layout(const ModelConfig& cfg) {
    const size_t d = cfg.d_model;
    const size_t f = d * kFfnMult;
    ParamLayout lo;
    size_t off = 0;
    lo.tok_emb = off; off += static_cast<size_t>(cfg.vocab_size) * d;
    lo.img_emb = off; off += static_cast<size_t>(cfg.image_vocab_size) * d;
    lo.pos_emb = off; off += static_cast<size_t>(cfg.max_seq_len) * d;
    lo.layers.resize(cfg.n_layers);
    for (auto& l : lo.layers) {
        l.wq = off; off += d * d;
        l.wk = off; off += d * d;
        l.wv = off; off += d * d;
        l.wo = off; off += d * d;
        l.w1 = off; off += d * f;
        l.w2 = off; off += f * d;
    }
    lo.head = off; off += d * static_cast<size_t>(cfg.vocab_size);
    lo.total = off;
    return lo;
}

MicroModelParameters init_params(const ModelConfig& cfg, uint64_t seed) {
    validate_config(cfg).require();
    MicroModelParameters p;
    p.config = cfg;
    p.layout = make_layout(cfg);
    p.data.resize(p.layout.total);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
    Rng rng(seed);
    for (double& w : p.data) w = rng.uniform(-scale, scale);
    return p;
}

MicroModelParameters init_params(const ModelConfig& cfg) { return init_params(cfg, cfg.seed); }

ForwardTrace forward(const MicroModelParameters& params, const std::vector<int>& tokens,
                     const TokenSegmentation& seg, const AttentionRowHook* hook) {
    const ModelConfig& cfg = params.config;
    validate_config(cfg).require();
    validate_segmentation(seg).require();
    const int t = static_cast<int>(tokens.size());
    if (t < 1) throw Error(Errc::invalid_argument, "empty token sequence");
    if (t > cfg.max_seq_len)
        throw Error(Errc::sequence_too_long, "sequence length " + std::to_string(t) +
                                                 " exceeds max_seq_len " +
                                                 std::to_string(cfg.max_seq_len));
    if (seg.total_len != t)
        throw Error(Errc::shape_mismatch, "segmentation total_len != token count");
    for (int i = 0; i < t; ++i) {
        const int limit = seg.in_image(i) ? cfg.image_vocab_size : cfg.vocab_size;
        if (tokens[i] < 0 || tokens[i] >= limit)
            throw Error(Errc::symbol_out_of_range,
                        "symbol " + std::to_string(tokens[i]) + " at position " +
                            std::to_string(i) + " outside vocab of size " +
                            std::to_string(limit));
    }

    const int d = cfg.d_model;
    const int f = d * kFfnMult;
    const int H = cfg.n_heads;
    const int dh = d / H;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    const ParamLayout& lo = params.layout;

    ForwardTrace tr;
    tr.tokens = tokens;
    tr.seg = seg;
    tr.seq_len = t;
    tr.params_version = params.version;
    tr.intervened = hook != nullptr;
    tr.attention = AttentionTensor(cfg.n_layers, H, t, /*causal=*/true);
    tr.layers.resize(cfg.n_layers);

    std::vector<double> x(static_cast<size_t>(t) * d);
    for (int i = 0; i < t; ++i) {
        const double* emb = seg.in_image(i) ? params.at(lo.img_emb + static_cast<size_t>(tokens[i]) * d)
                                            : params.at(lo.tok_emb + static_cast<size_t>(tokens[i]) * d);
        const double* pos = params.at(lo.pos_emb + static_cast<size_t>(i) * d);
        double* xi = x.data() + static_cast<size_t>(i) * d;
        for (int e = 0; e < d; ++e) xi[e] = emb[e] + pos[e];
    }

    std::vector<double> scores(t);
    for (int l = 0; l < cfg.n_layers; ++l) {
        auto& cache = tr.layers[l];
        cache.x_in = x;
        cache.q.resize(x.size());
        cache.k.resize(x.size());
        cache.v.resize(x.size());
        mm(x.data(), params.at(lo.layers[l].wq), cache.q.data(), t, d, d);
        mm(x.data(), params.at(lo.layers[l].wk), cache.k.data(), t, d, d);
        mm(x.data(), params.at(lo.layers[l].wv), cache.v.data(), t, d, d);

        cache.mixed.assign(x.size(), 0.0);
        for (int h = 0; h < H; ++h) {
            const int hoff = h * dh;
            for (int i = 0; i < t; ++i) {
                const double* qi = cache.q.data() + static_cast<size_t>(i) * d + hoff;
                for (int j = 0; j <= i; ++j) {
                    const double* kj = cache.k.data() + static_cast<size_t>(j) * d + hoff;
                    double acc = 0.0;
                    for (int e = 0; e < dh; ++e) acc += qi[e] * kj[e];
                    scores[j] = acc * inv_sqrt_dh;
                }
                auto arow = tr.attention.row(l, h, i);
                softmax_row({scores.data(), static_cast<size_t>(i) + 1},
                            arow.subspan(0, static_cast<size_t>(i) + 1), /*causal=*/false, i);
                if (hook) (*hook)(l, h, i, arow);
                double* mi = cache.mixed.data() + static_cast<size_t>(i) * d + hoff;
                for (int j = 0; j <= i; ++j) {
                    const double a = arow[j];
                    if (a == 0.0) continue;
                    const double* vj = cache.v.data() + static_cast<size_t>(j) * d + hoff;
                    for (int e = 0; e < dh; ++e) mi[e] += a * vj[e];
                }
            }
        }

        cache.x_mid.resize(x.size());
        mm(cache.mixed.data(), params.at(lo.layers[l].wo), cache.x_mid.data(), t, d, d);
        for (size_t i = 0; i < x.size(); ++i) cache.x_mid[i] += x[i];

        cache.u.resize(static_cast<size_t>(t) * f);
        mm(cache.x_mid.data(), params.at(lo.layers[l].w1), cache.u.data(), t, d, f);
        cache.g.resize(cache.u.size());
        for (size_t i = 0; i < cache.u.size(); ++i) cache.g[i] = gelu(cache.u[i]);

        mm(cache.g.data(), params.at(lo.layers[l].w2), x.data(), t, f, d);
        for (size_t i = 0; i < x.size(); ++i) x[i] += cache.x_mid[i];
    }

    tr.x_final = x;
    tr.logits.resize(static_cast<size_t>(t) * cfg.vocab_size);
    mm(x.data(), params.at(lo.head), tr.logits.data(), t, d, cfg.vocab_size);
    for (double v : tr.logits)
        if (!std::isfinite(v)) throw Error(Errc::nonfinite_input, "non-finite logit");
    return tr;
}

std::vector<int> response_targets(const ForwardTrace& trace) {
    const Span& r = trace.seg.response_span;
    if (r.empty()) throw Error(Errc::empty_response_span, "response span is empty");
    return {trace.tokens.begin() + r.begin, trace.tokens.begin() + r.end};
}

LmLossGrad lm_loss_grad(const ForwardTrace& trace, const std::vector<int>& targets) {
    const Span& r = trace.seg.response_span;
    if (r.empty()) throw Error(Errc::empty_response_span, "response span is empty");
    if (static_cast<int>(targets.size()) != r.size())
        throw Error(Errc::shape_mismatch, "targets size != response span size");
    if (r.begin == 0)
        throw Error(Errc::invalid_argument,
                    "response span starts at position 0; no preceding context row");
    const int vocab = static_cast<int>(trace.logits.size()) / trace.seq_len;
    LmLossGrad out;
    out.dlogits.assign(trace.logits.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(targets.size());
    for (int j = 0; j < r.size(); ++j) {
        const int tgt = targets[j];
        if (tgt < 0 || tgt >= vocab)
            throw Error(Errc::symbol_out_of_range, "target symbol outside text vocab");
        const int row = r.begin + j - 1;  // next-token prediction
        const double* z = trace.logits.data() + static_cast<size_t>(row) * vocab;
        double m = z[0];
        for (int v = 1; v < vocab; ++v) m = std::max(m, z[v]);
        double sum = 0.0;
        for (int v = 0; v < vocab; ++v) sum += std::exp(z[v] - m);
        const double lse = m + std::log(sum);
        out.loss += (lse - z[tgt]) * inv_n;
        double* dz = out.dlogits.data() + static_cast<size_t>(row) * vocab;
        for (int v = 0; v < vocab; ++v) dz[v] += std::exp(z[v] - lse) * inv_n;
        dz[tgt] -= inv_n;
    }
    return out;
}

double lm_loss(const ForwardTrace& trace, const std::vector<int>& targets) {
    return lm_loss_grad(trace, targets).loss;
}

std::vector<double> backward(const MicroModelParameters& params, const ForwardTrace& trace,
                             const std::vector<double>& dlogits,
                             const std::vector<double>& dattention) {
    if (trace.params_version != params.version)
        throw Error(Errc::stale_trace, "parameters mutated since forward");
    if (trace.intervened)
        throw Error(Errc::stale_trace, "trace was produced with an attention hook");
    const ModelConfig& cfg = params.config;
    const int t = trace.seq_len;
    const int d = cfg.d_model;
    const int f = d * kFfnMult;
    const int H = cfg.n_heads;
    const int dh = d / H;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    const ParamLayout& lo = params.layout;
    if (!dlogits.empty() && dlogits.size() != trace.logits.size())
        throw Error(Errc::shape_mismatch, "dlogits size mismatch");
    if (!dattention.empty() && dattention.size() != trace.attention.weights.size())
        throw Error(Errc::shape_mismatch, "dattention size mismatch");

    std::vector<double> grads(lo.total, 0.0);
    std::vector<double> dx(static_cast<size_t>(t) * d, 0.0);

    if (!dlogits.empty()) {
        mm_at_b_acc(trace.x_final.data(), dlogits.data(), grads.data() + lo.head, t, d,
                    cfg.vocab_size);
        mm_a_bt_acc(dlogits.data(), params.at(lo.head), dx.data(), t, cfg.vocab_size, d);
    }

    std::vector<double> du(static_cast<size_t>(t) * f);
    std::vector<double> dmixed(static_cast<size_t>(t) * d);
    std::vector<double> dq(static_cast<size_t>(t) * d);
    std::vector<double> dk(static_cast<size_t>(t) * d);
    std::vector<double> dv(static_cast<size_t>(t) * d);
    std::vector<double> da_row(t);

    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        const auto& cache = trace.layers[l];

        // x_out = x_mid + gelu(x_mid W1) W2
        mm_at_b_acc(cache.g.data(), dx.data(), grads.data() + lo.layers[l].w2, t, f, d);
        std::fill(du.begin(), du.end(), 0.0);
        mm_a_bt_acc(dx.data(), params.at(lo.layers[l].w2), du.data(), t, d, f);
        for (size_t i = 0; i < du.size(); ++i) du[i] *= gelu_deriv(cache.u[i]);
        mm_at_b_acc(cache.x_mid.data(), du.data(), grads.data() + lo.layers[l].w1, t, d, f);
        // dx now becomes d x_mid: residual plus FFN input path
        mm_a_bt_acc(du.data(), params.at(lo.layers[l].w1), dx.data(), t, f, d);

        // x_mid = x_in + mixed Wo
        mm_at_b_acc(cache.mixed.data(), dx.data(), grads.data() + lo.layers[l].wo, t, d, d);
        std::fill(dmixed.begin(), dmixed.end(), 0.0);
        mm_a_bt_acc(dx.data(), params.at(lo.layers[l].wo), dmixed.data(), t, d, d);

        std::fill(dq.begin(), dq.end(), 0.0);
        std::fill(dk.begin(), dk.end(), 0.0);
        std::fill(dv.begin(), dv.end(), 0.0);
        for (int h = 0; h < H; ++h) {
            const int hoff = h * dh;
            for (int i = 0; i < t; ++i) {
                const auto arow = trace.attention.row(l, h, i);
                const double* dmi = dmixed.data() + static_cast<size_t>(i) * d + hoff;
                // dA from value mixing plus any upstream attention-loss term
                for (int j = 0; j <= i; ++j) {
                    const double* vj = cache.v.data() + static_cast<size_t>(j) * d + hoff;
                    double acc = 0.0;
                    for (int e = 0; e < dh; ++e) acc += dmi[e] * vj[e];
                    da_row[j] = acc;
                    double* dvj = dv.data() + static_cast<size_t>(j) * d + hoff;
                    const double a = arow[j];
                    for (int e = 0; e < dh; ++e) dvj[e] += a * dmi[e];
                }
                if (!dattention.empty()) {
                    const double* up = dattention.data() + trace.attention.index(l, h, i, 0);
                    for (int j = 0; j <= i; ++j) da_row[j] += up[j];
                }
                // softmax Jacobian: ds_j = a_j (da_j - sum_k a_k da_k)
                double dot = 0.0;
                for (int j = 0; j <= i; ++j) dot += arow[j] * da_row[j];
                const double* qi = cache.q.data() + static_cast<size_t>(i) * d + hoff;
                double* dqi = dq.data() + static_cast<size_t>(i) * d + hoff;
                for (int j = 0; j <= i; ++j) {
                    const double ds = arow[j] * (da_row[j] - dot) * inv_sqrt_dh;
                    if (ds == 0.0) continue;
                    const double* kj = cache.k.data() + static_cast<size_t>(j) * d + hoff;
                    double* dkj = dk.data() + static_cast<size_t>(j) * d + hoff;
                    for (int e = 0; e < dh; ++e) {
                        dqi[e] += ds * kj[e];
                        dkj[e] += ds * qi[e];
                    }
                }
            }
        }

        mm_at_b_acc(cache.x_in.data(), dq.data(), grads.data() + lo.layers[l].wq, t, d, d);
        mm_at_b_acc(cache.x_in.data(), dk.data(), grads.data() + lo.layers[l].wk, t, d, d);
        mm_at_b_acc(cache.x_in.data(), dv.data(), grads.data() + lo.layers[l].wv, t, d, d);
        // dx accumulates into d x_in: residual already in dx
        mm_a_bt_acc(dq.data(), params.at(lo.layers[l].wq), dx.data(), t, d, d);
        mm_a_bt_acc(dk.data(), params.at(lo.layers[l].wk), dx.data(), t, d, d);
        mm_a_bt_acc(dv.data(), params.at(lo.layers[l].wv), dx.data(), t, d, d);
    }

    for (int i = 0; i < t; ++i) {
        const double* dxi = dx.data() + static_cast<size_t>(i) * d;
        const size_t emb_off = trace.seg.in_image(i)
                                   ? lo.img_emb + static_cast<size_t>(trace.tokens[i]) * d
                                   : lo.tok_emb + static_cast<size_t>(trace.tokens[i]) * d;
        double* demb = grads.data() + emb_off;
        double* dpos = grads.data() + lo.pos_emb + static_cast<size_t>(i) * d;
        for (int e = 0; e < d; ++e) {
            demb[e] += dxi[e];
            dpos[e] += dxi[e];
        }
    }
    return grads;
}

std::vector<double> finite_diff_grad(
    const std::function<double(const MicroModelParameters&)>& loss_fn,
    const MicroModelParameters& params, double h) {
    if (!(h > 0.0)) throw Error(Errc::invalid_argument, "h must be > 0");
    MicroModelParameters p = params;
    std::vector<double> g(p.data.size());
    for (size_t i = 0; i < p.data.size(); ++i) {
        const double orig = p.data[i];
        p.data[i] = orig + h;
        const double fp = loss_fn(p);
        p.data[i] = orig - h;
        const double fm = loss_fn(p);
        p.data[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

void sgd_step(MicroModelParameters& params, const std::vector<double>& grads, double lr) {
    if (!(lr > 0.0)) throw Error(Errc::invalid_argument, "lr must be > 0");
    if (grads.size() != params.data.size())
        throw Error(Errc::shape_mismatch, "gradient size != parameter size");
    for (size_t i = 0; i < grads.size(); ++i) params.data[i] -= lr * grads[i];
    ++params.version;
}

std::vector<double> softmax_logits_row(const ForwardTrace& trace, int pos) {
    std::vector<double> p = log_softmax_logits_row(trace, pos);
    for (double& v : p) v = std::exp(v);
    return p;
}

std::vector<double> log_softmax_logits_row(const ForwardTrace& trace, int pos) {
    if (pos < 0 || pos >= trace.seq_len)
        throw Error(Errc::out_of_range, "logit row out of range");
    const int vocab = static_cast<int>(trace.logits.size()) / trace.seq_len;
    const double* z = trace.logits.data() + static_cast<size_t>(pos) * vocab;
    double m = z[0];
    for (int v = 1; v < vocab; ++v) m = std::max(m, z[v]);
    double sum = 0.0;
    for (int v = 0; v < vocab; ++v) sum += std::exp(z[v] - m);
    const double lse = m + std::log(sum);
    std::vector<double> out(vocab);
    for (int v = 0; v < vocab; ++v) out[v] = z[v] - lse;
    return out;
}

std::vector<uint8_t> write_checkpoint(const MicroModelParameters& params, int64_t step) {
    json header;
    header["version"] = 1;
    header["config"] = config_json(params.config);
    header["step"] = step;
    header["param_count"] = params.data.size();
    const std::string head = header.dump();

    std::vector<uint8_t> out;
    out.reserve(8 + 4 + head.size() + params.data.size() * 8);
    out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 8);
    put_u32le(out, static_cast<uint32_t>(head.size()));
    out.insert(out.end(), head.begin(), head.end());
    for (double w : params.data) put_f64le(out, w);
    return out;
}

Checkpoint read_checkpoint(std::span<const uint8_t> bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
        throw Error(Errc::bad_magic, "not an AVARCKP1 stream");
    const uint32_t head_len = get_u32le(bytes.data() + 8);
    if (bytes.size() < 12 + static_cast<size_t>(head_len))
        throw Error(Errc::length_mismatch, "truncated checkpoint header");

    Checkpoint ck;
    size_t count = 0;
    try {
        const json header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + head_len);
        if (header.at("version").get<int>() != 1)
            throw Error(Errc::header_parse, "unsupported checkpoint version");
        ck.params.config = config_from_json(header.at("config"));
        ck.step = header.at("step").get<int64_t>();
        count = header.at("param_count").get<size_t>();
    } catch (const json::exception& e) {
        throw Error(Errc::header_parse, std::string("checkpoint header: ") + e.what());
    }
    validate_config(ck.params.config).require();
    ck.params.layout = make_layout(ck.params.config);
    if (count != ck.params.layout.total)
        throw Error(Errc::header_parse, "param_count inconsistent with config shapes");
    if (bytes.size() != 12 + static_cast<size_t>(head_len) + count * 8)
        throw Error(Errc::length_mismatch, "checkpoint payload size mismatch");

    ck.params.data.resize(count);
    const uint8_t* p = bytes.data() + 12 + head_len;
    for (size_t i = 0; i < count; ++i) ck.params.data[i] = get_f64le(p + i * 8);
    for (double w : ck.params.data)
        if (!std::isfinite(w)) throw Error(Errc::nonfinite_input, "non-finite checkpoint weight");
    return ck;
}

void save_checkpoint_file(const std::string& path, const MicroModelParameters& params,
                          int64_t step) {
    write_file_bytes(path, write_checkpoint(params, step));
}

Checkpoint load_checkpoint_file(const std::string& path) {
    return read_checkpoint(read_file_bytes(path));
}

}  // namespace avar

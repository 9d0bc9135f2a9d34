#include "training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "rng.hpp"

namespace wdtl {

void AdaptConfig::validate() const {
    if (batch_size < 2) throw ContractError("config: batch_size must be >= 2");
    if (critic_steps < 0) throw ContractError("config: critic_steps must be >= 0");
    if (lr_critic <= 0.0 || lr_main <= 0.0)
        throw ContractError("config: learning rates must be > 0");
    if (rho < 0.0) throw ContractError("config: rho must be >= 0");
    if (lambda < 0.0) throw ContractError("config: lambda must be >= 0");
    if (max_iterations < 1) throw ContractError("config: max_iterations must be >= 1");
    if (eval_every < 1) throw ContractError("config: eval_every must be >= 1");
}

std::map<std::string, std::string> AdaptConfig::snapshot() const {
    auto fmt = [](double v) {
        std::ostringstream s;
        s.precision(17);
        s << v;
        return s.str();
    };
    return {
        {"batch_size", std::to_string(batch_size)},
        {"critic_steps", std::to_string(critic_steps)},
        {"lr_critic", fmt(lr_critic)},
        {"lr_main", fmt(lr_main)},
        {"rho", fmt(rho)},
        {"lambda", fmt(lambda)},
        {"max_iterations", std::to_string(max_iterations)},
        {"eval_every", std::to_string(eval_every)},
        {"optimizer", optimizer == OptKind::Adam ? "adam" : "plain"},
        {"seed", std::to_string(seed)},
        {"reinit_discriminator", reinit_discriminator ? "true" : "false"},
        {"precision", fp32 ? "f32" : "f64"},
    };
}

Model Model::init(uint64_t seed) {
    Model m;
    auto rng_f = make_rng(seed, "init-extractor");
    auto rng_d = make_rng(seed, "init-discriminator");
    auto rng_c = make_rng(seed, "init-critic");
    m.extractor = make_extractor(rng_f);
    m.discriminator = make_discriminator(rng_d);
    m.critic = make_critic(rng_c);
    return m;
}

std::vector<std::pair<std::string, Tensor>> Model::named_params() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& t : extractor.params()) out.emplace_back(t->name, t);
    for (const auto& t : discriminator.params()) out.emplace_back(t->name, t);
    for (const auto& t : critic.params()) out.emplace_back(t->name, t);
    return out;
}

static Tensor clone_param(const Tensor& t) {
    auto c = make_tensor(t->shape, t->value, true, t->name);
    return c;
}

Model Model::clone() const {
    Model m;
    m.extractor.conv1 = {clone_param(extractor.conv1.w),
                         clone_param(extractor.conv1.b), extractor.conv1.stride};
    m.extractor.pool1 = extractor.pool1;
    m.extractor.conv2 = {clone_param(extractor.conv2.w),
                         clone_param(extractor.conv2.b), extractor.conv2.stride};
    m.extractor.pool2 = extractor.pool2;
    m.discriminator.fc1 = {clone_param(discriminator.fc1.w),
                           clone_param(discriminator.fc1.b)};
    m.discriminator.fc2 = {clone_param(discriminator.fc2.w),
                           clone_param(discriminator.fc2.b)};
    m.critic.l1 = {clone_param(critic.l1.w), clone_param(critic.l1.b)};
    m.critic.l2 = {clone_param(critic.l2.w), clone_param(critic.l2.b)};
    return m;
}

// ---- checkpoint io -----------------------------------------------------

namespace {

constexpr char kCkptMagic[4] = {'W', 'D', 'C', 'K'};
constexpr uint32_t kCkptVersion = 1;

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in) throw FormatError(std::string("checkpoint truncated reading ") + what);
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

void write_string(std::ostream& out, const std::string& s) {
    write_le<uint32_t>(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<long>(s.size()));
}

std::string read_string(std::istream& in, const char* what) {
    const uint32_t len = read_le<uint32_t>(in, what);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw FormatError(std::string("checkpoint truncated reading ") + what);
    return s;
}

} // namespace

void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kCkptMagic, 4);
    write_le<uint32_t>(out, kCkptVersion);

    std::ostringstream cfg;
    for (const auto& [k, v] : ckpt.config) cfg << k << "=" << v << "\n";
    cfg << "iteration=" << ckpt.iteration << "\n";
    cfg << "validation_accuracy=" << std::setprecision(17)
        << ckpt.validation_accuracy << "\n";
    write_string(out, cfg.str());

    const auto params = ckpt.model.named_params();
    write_le<uint32_t>(out, static_cast<uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        write_string(out, name);
        write_le<uint8_t>(out, static_cast<uint8_t>(t->shape.size()));
        for (int d : t->shape) write_le<uint32_t>(out, static_cast<uint32_t>(d));
        for (double v : t->value) {
            const float f = static_cast<float>(v);
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            write_le<uint32_t>(out, bits);
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

ModelCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCkptMagic, 4) != 0)
        throw FormatError("bad checkpoint magic at byte 0 (expected WDCK)");
    const uint32_t version = read_le<uint32_t>(in, "version");
    if (version != kCkptVersion)
        throw FormatError("unsupported checkpoint version " +
                          std::to_string(version));

    ModelCheckpoint ckpt;
    ckpt.model = Model::init(0); // shapes; values overwritten below
    {
        std::istringstream cfg(read_string(in, "config block"));
        std::string line;
        while (std::getline(cfg, line)) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = line.substr(0, eq);
            const std::string val = line.substr(eq + 1);
            if (key == "iteration")
                ckpt.iteration = std::stoi(val);
            else if (key == "validation_accuracy")
                ckpt.validation_accuracy = std::stod(val);
            else
                ckpt.config[key] = val;
        }
    }

    std::map<std::string, Tensor> by_name;
    for (auto& [name, t] : ckpt.model.named_params()) by_name[name] = t;

    const uint32_t count = read_le<uint32_t>(in, "parameter count");
    for (uint32_t p = 0; p < count; ++p) {
        const std::string name = read_string(in, "parameter name");
        const uint8_t rank = read_le<uint8_t>(in, "parameter rank");
        std::vector<int> shape(rank);
        for (int d = 0; d < rank; ++d)
            shape[d] = static_cast<int>(read_le<uint32_t>(in, "parameter dims"));
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw FormatError("unknown parameter name in checkpoint: " + name);
        if (it->second->shape != shape)
            throw FormatError("parameter shape mismatch for " + name);
        for (double& v : it->second->value) {
            const uint32_t bits = read_le<uint32_t>(in, "parameter data");
            float f;
            std::memcpy(&f, &bits, 4);
            v = f;
        }
    }
    if (count != by_name.size())
        throw FormatError("checkpoint parameter count mismatch");
    return ckpt;
}

// ---- training ----------------------------------------------------------

namespace {

uint64_t derive_seed(uint64_t seed, std::string_view purpose) {
    return seed ^ fnv1a64(purpose);
}

void check_finite(double v, const char* loss_name, int iteration) {
    if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "non-finite " << loss_name << " at iteration " << iteration;
        throw NumericError(msg.str());
    }
}

// Temporarily removes a parameter set from gradient tracking.
struct FreezeGuard {
    std::vector<Tensor> params;
    explicit FreezeGuard(std::vector<Tensor> p) : params(std::move(p)) {
        for (auto& t : params) t->requires_grad = false;
    }
    ~FreezeGuard() {
        for (auto& t : params) t->requires_grad = true;
    }
};

std::vector<int> gather_labels(const Dataset& ds, const std::vector<int>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(ds.samples[i].label);
    return out;
}

} // namespace

PretrainResult pretrain(const Dataset& source, const AdaptConfig& cfg) {
    cfg.validate();
    if (!source.fully_labeled())
        throw ContractError("pretrain: source dataset must be labeled");

    auto [train, val] = split(source, 0.8, derive_seed(cfg.seed, "pretrain-split"));
    Model model = Model::init(cfg.seed);
    std::vector<Tensor> main_params = model.extractor.params();
    for (auto& t : model.discriminator.params()) main_params.push_back(t);
    Optimizer opt(cfg.optimizer, cfg.lr_main, main_params);
    BatchIterator batches(static_cast<int>(train.samples.size()), cfg.batch_size,
                          derive_seed(cfg.seed, "pretrain-batch"));

    PretrainResult result;
    result.best.config = cfg.snapshot();
    double best_acc = -1.0;
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        const auto idx = batches.next();
        Tape tape;
        tape.set_precision32(cfg.fp32);
        Tensor h = model.extractor.forward(tape, batch_input(train, idx));
        Tensor probs = model.discriminator.forward_probs(tape, h);
        Tensor l_c = tape.cross_entropy(probs, gather_labels(train, idx));
        check_finite(l_c->value[0], "l_c", it);
        result.loss_curve.push_back(l_c->value[0]);
        tape.backward(l_c);
        opt.step(StepDirection::Descent);
        opt.zero_grad();

        if (it % cfg.eval_every == 0 || it == cfg.max_iterations) {
            const auto ev = evaluate(model.extractor, model.discriminator, val);
            if (ev.accuracy > best_acc) {
                best_acc = ev.accuracy;
                result.best.model = model.clone();
                result.best.iteration = it;
                result.best.validation_accuracy = ev.accuracy;
            }
        }
    }
    result.best_validation_accuracy = best_acc;
    return result;
}

std::pair<ModelCheckpoint, RunReport> adapt(const Dataset& source,
                                            const Dataset& target,
                                            const AdaptConfig& cfg,
                                            const ModelCheckpoint& init,
                                            const Dataset* labeled_target,
                                            const PhaseObserver& observer) {
    cfg.validate();
    if (!source.fully_labeled())
        throw ContractError("adapt: source dataset must be labeled");
    if (target.samples.empty()) throw ContractError("adapt: empty target dataset");

    Model model = init.model.clone();
    if (model.extractor.feature_dim(kInputLen) != model.critic.in_dim())
        throw DimensionError("adapt: checkpoint shapes inconsistent");
    if (cfg.reinit_discriminator) {
        auto rng = make_rng(cfg.seed, "reinit-discriminator");
        model.discriminator = make_discriminator(rng);
    }

    const bool supervised = labeled_target && !labeled_target->samples.empty();
    if (supervised && !labeled_target->fully_labeled())
        throw ContractError("adapt: labeled target set must be labeled");
    // labeled-target fraction |labeled|/(|labeled|+n), capped at 50%
    const int n = cfg.batch_size;
    const int labeled_per_batch =
        supervised
            ? std::min(static_cast<int>(labeled_target->samples.size()), n)
            : 0;

    Optimizer critic_opt(cfg.optimizer, cfg.lr_critic, model.critic.params());
    Optimizer disc_opt(cfg.optimizer, cfg.lr_main, model.discriminator.params());
    Optimizer feat_opt(cfg.optimizer, cfg.lr_main, model.extractor.params());

    BatchIterator src_batches(static_cast<int>(source.samples.size()), n,
                              derive_seed(cfg.seed, "adapt-source"));
    BatchIterator tgt_batches(static_cast<int>(target.samples.size()), n,
                              derive_seed(cfg.seed, "adapt-target"));
    std::optional<BatchIterator> lab_batches;
    if (labeled_per_batch > 0)
        lab_batches.emplace(static_cast<int>(labeled_target->samples.size()),
                            labeled_per_batch,
                            derive_seed(cfg.seed, "adapt-labeled-target"));
    auto interp_rng = make_rng(cfg.seed, "adapt-interpolates");

    const bool target_labeled = target.fully_labeled();
    RunReport report;
    ModelCheckpoint best;
    best.config = cfg.snapshot();
    double best_acc = -1.0;

    for (int it = 1; it <= cfg.max_iterations; ++it) {
        const auto src_idx = src_batches.next();
        const auto tgt_idx = tgt_batches.next();
        Tensor x_s = batch_input(source, src_idx);
        Tensor x_t = batch_input(target, tgt_idx);

        // Features are frozen across the critic inner loop (theta_f does
        // not change), so extract once.
        Tensor h_s0, h_t0;
        if (cfg.critic_steps > 0) {
            Tape tape;
            tape.set_precision32(cfg.fp32);
            h_s0 = detach(model.extractor.forward(tape, x_s));
            h_t0 = detach(model.extractor.forward(tape, x_t));
        }

        double l_wd_val = 0.0, l_grad_val = 0.0;
        for (int c = 0; c < cfg.critic_steps; ++c) {
            Tape tape;
            tape.set_precision32(cfg.fp32);
            Tensor l_wd = empirical_wasserstein(tape, model.critic, h_s0, h_t0);
            Tensor h_r = interpolates(h_s0, h_t0, interp_rng);
            Tensor l_grad =
                gradient_penalty(tape, model.critic, assemble_h(h_s0, h_t0, h_r));
            Tensor objective = tape.sub(l_wd, tape.scale(l_grad, cfg.rho));
            check_finite(objective->value[0], "critic objective", it);
            l_wd_val = l_wd->value[0];
            l_grad_val = l_grad->value[0];
            tape.backward(objective);
            critic_opt.step(StepDirection::Ascent);
            critic_opt.zero_grad();
        }
        if (observer) observer(it, 'c', model);

        // Classification batch: source, plus resampled labeled target in
        // the supervised variant.
        std::vector<int> cls_labels = gather_labels(source, src_idx);
        Tensor x_cls = x_s;
        if (labeled_per_batch > 0) {
            const auto lab_idx = lab_batches->next();
            Tensor x_lab = batch_input(*labeled_target, lab_idx);
            x_cls = make_tensor({n + labeled_per_batch, 1, kSpectrumBins});
            std::copy(x_s->value.begin(), x_s->value.end(), x_cls->value.begin());
            std::copy(x_lab->value.begin(), x_lab->value.end(),
                      x_cls->value.begin() + x_s->size());
            for (int i : lab_idx) cls_labels.push_back(labeled_target->samples[i].label);
        }

        double l_c_val = 0.0;
        {
            // discriminator step: only theta_d moves
            FreezeGuard freeze_f(model.extractor.params());
            Tape tape;
            tape.set_precision32(cfg.fp32);
            Tensor h = model.extractor.forward(tape, x_cls);
            Tensor probs = model.discriminator.forward_probs(tape, h);
            Tensor l_c = tape.cross_entropy(probs, cls_labels);
            check_finite(l_c->value[0], "l_c", it);
            l_c_val = l_c->value[0];
            tape.backward(l_c);
            disc_opt.step(StepDirection::Descent);
            disc_opt.zero_grad();
        }
        if (observer) observer(it, 'd', model);

        {
            // extractor step: l_c + lambda * l_wd, only theta_f moves
            FreezeGuard freeze_d(model.discriminator.params());
            FreezeGuard freeze_c(model.critic.params());
            Tape tape;
            tape.set_precision32(cfg.fp32);
            Tensor h_cls = model.extractor.forward(tape, x_cls);
            Tensor probs = model.discriminator.forward_probs(tape, h_cls);
            Tensor loss = tape.cross_entropy(probs, cls_labels);
            if (cfg.lambda > 0.0) {
                Tensor h_src = labeled_per_batch > 0
                                   ? tape.slice_rows(h_cls, 0, n)
                                   : h_cls;
                Tensor h_tgt = model.extractor.forward(tape, x_t);
                Tensor l_wd =
                    empirical_wasserstein(tape, model.critic, h_src, h_tgt);
                loss = tape.add(loss, tape.scale(l_wd, cfg.lambda));
            }
            check_finite(loss->value[0], "extractor loss", it);
            tape.backward(loss);
            feat_opt.step(StepDirection::Descent);
            feat_opt.zero_grad();
        }
        if (observer) observer(it, 'f', model);

        if (it % cfg.eval_every == 0 || it == cfg.max_iterations) {
            IterLog log;
            log.iteration = it;
            log.l_c = l_c_val;
            log.l_wd = l_wd_val;
            log.l_grad = l_grad_val;
            if (target_labeled) {
                const auto ev =
                    evaluate(model.extractor, model.discriminator, target);
                log.target_accuracy = ev.accuracy;
                if (ev.accuracy > best_acc) {
                    best_acc = ev.accuracy;
                    best.model = model.clone();
                    best.iteration = it;
                    best.validation_accuracy = ev.accuracy;
                }
            }
            report.logs.push_back(log);
        }
    }

    if (target_labeled) {
        report.final_eval = evaluate(model.extractor, model.discriminator, target);
        report.final_accuracy = report.final_eval.accuracy;
        report.best_accuracy = best_acc;
        report.best_iteration = best.iteration;
    } else {
        best.model = model.clone();
        best.iteration = cfg.max_iterations;
    }
    return {std::move(best), std::move(report)};
}

std::pair<ModelCheckpoint, RunReport> adapt_supervised(
    const Dataset& source, const Dataset& target_labeled_small,
    const Dataset& target_unlabeled, const AdaptConfig& cfg,
    const ModelCheckpoint& init) {
    return adapt(source, target_unlabeled, cfg, init, &target_labeled_small);
}

} // namespace wdtl

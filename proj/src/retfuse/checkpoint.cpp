#include "retfuse/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "retfuse/errors.hpp"
#include "retfuse/tokenizer.hpp"

namespace retfuse {

namespace {

constexpr char kMagic[8] = {'R', 'F', 'C', 'K', 'P', 'T', '0', '\0'};
constexpr uint32_t kVersion = 1;

void write_raw(std::ostream& out, const void* p, size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ostream& out, T v) {
    write_raw(out, &v, sizeof(T));
}

void write_str(std::ostream& out, const std::string& s) {
    write_pod<uint64_t>(out, s.size());
    write_raw(out, s.data(), s.size());
}

void write_tensor(std::ostream& out, const torch::Tensor& t) {
    auto cpu = t.detach().to(torch::kCPU, torch::kFloat32).contiguous();
    write_pod<uint32_t>(out, static_cast<uint32_t>(cpu.dim()));
    for (int64_t i = 0; i < cpu.dim(); ++i) write_pod<int64_t>(out, cpu.size(i));
    uint64_t nbytes = static_cast<uint64_t>(cpu.numel()) * sizeof(float);
    write_pod<uint64_t>(out, nbytes);
    write_raw(out, cpu.data_ptr<float>(), nbytes);
}

void read_raw(std::istream& in, void* p, size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw IoError("truncated checkpoint file");
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    read_raw(in, &v, sizeof(T));
    return v;
}

std::string read_str(std::istream& in) {
    auto n = read_pod<uint64_t>(in);
    std::string s(n, '\0');
    read_raw(in, s.data(), n);
    return s;
}

torch::Tensor read_tensor(std::istream& in) {
    auto ndim = read_pod<uint32_t>(in);
    std::vector<int64_t> dims;
    for (uint32_t i = 0; i < ndim; ++i) dims.push_back(read_pod<int64_t>(in));
    auto nbytes = read_pod<uint64_t>(in);
    auto t = torch::empty(dims, torch::kFloat32);
    if (static_cast<uint64_t>(t.numel()) * sizeof(float) != nbytes)
        throw IoError("checkpoint tensor byte count mismatch");
    read_raw(in, t.data_ptr<float>(), nbytes);
    return t;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::string stats_to_text(const StructuredStats& s) {
    std::string out;
    for (const auto& [k, v] : s.to_kv()) out += k + "=" + v + "\n";
    return out;
}

StructuredStats stats_from_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    for (const auto& line : split_lines(text)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return StructuredStats::from_kv(kv);
}

} // namespace

void save_checkpoint(const std::string& path, const CheckpointData& data) {
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        write_raw(out, kMagic, sizeof(kMagic));
        write_pod<uint32_t>(out, kVersion);
        write_str(out, data.config.to_text());
        write_str(out, stats_to_text(data.stats));
        write_str(out, join_lines(data.vocab_tokens));
        write_pod<int64_t>(out, data.epoch);
        write_pod<double>(out, data.best_val);

        write_pod<uint64_t>(out, data.params.size());
        for (const auto& [name, t] : data.params) {
            write_str(out, name);
            write_tensor(out, t);
        }
        write_pod<uint64_t>(out, data.opt_state.size());
        for (const auto& [name, e] : data.opt_state) {
            write_str(out, name);
            write_pod<int64_t>(out, e.step);
            write_tensor(out, e.exp_avg);
            write_tensor(out, e.exp_avg_sq);
        }
        write_pod<uint64_t>(out, data.rng_state.size());
        for (const auto& [name, bytes] : data.rng_state) {
            write_str(out, name);
            write_pod<uint64_t>(out, bytes.size());
            write_raw(out, bytes.data(), bytes.size());
        }
        out.flush();
        if (!out) {
            fs::remove(tmp);
            throw IoError("write failure: " + tmp.string());
        }
    }
    fs::rename(tmp, target);
}

CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    read_raw(in, magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw IoError("not a checkpoint file: " + path);
    auto version = read_pod<uint32_t>(in);
    if (version != kVersion) throw IncompatibleConfig("unsupported checkpoint version " + std::to_string(version));

    CheckpointData d;
    d.config = RunConfig::from_text(read_str(in));
    d.stats = stats_from_text(read_str(in));
    d.vocab_tokens = split_lines(read_str(in));
    d.epoch = read_pod<int64_t>(in);
    d.best_val = read_pod<double>(in);

    auto n_params = read_pod<uint64_t>(in);
    for (uint64_t i = 0; i < n_params; ++i) {
        auto name = read_str(in);
        d.params[name] = read_tensor(in);
    }
    auto n_opt = read_pod<uint64_t>(in);
    for (uint64_t i = 0; i < n_opt; ++i) {
        auto name = read_str(in);
        CheckpointData::OptEntry e;
        e.step = read_pod<int64_t>(in);
        e.exp_avg = read_tensor(in);
        e.exp_avg_sq = read_tensor(in);
        d.opt_state[name] = e;
    }
    auto n_rng = read_pod<uint64_t>(in);
    for (uint64_t i = 0; i < n_rng; ++i) {
        auto name = read_str(in);
        auto len = read_pod<uint64_t>(in);
        std::vector<uint8_t> bytes(len);
        read_raw(in, bytes.data(), len);
        d.rng_state[name] = std::move(bytes);
    }
    return d;
}

CheckpointData snapshot(const MultimodalModel& model, const torch::optim::AdamW* optimizer,
                        int64_t epoch, double best_val, const StructuredStats& stats,
                        const std::vector<std::string>& vocab_tokens) {
    CheckpointData d;
    d.config = model->config();
    d.stats = stats;
    d.vocab_tokens = vocab_tokens;
    d.epoch = epoch;
    d.best_val = best_val;
    for (const auto& p : model->named_parameters()) d.params[p.key()] = p.value().detach().clone();

    if (optimizer) {
        const auto& state = optimizer->state();
        for (const auto& p : model->named_parameters()) {
            auto it = state.find(p.value().unsafeGetTensorImpl());
            if (it == state.end()) continue;
            auto& st = static_cast<torch::optim::AdamWParamState&>(*it->second);
            CheckpointData::OptEntry e;
            e.step = st.step();
            e.exp_avg = st.exp_avg().detach().clone();
            e.exp_avg_sq = st.exp_avg_sq().detach().clone();
            d.opt_state[p.key()] = e;
        }
    }

    auto gen = at::detail::getDefaultCPUGenerator();
    auto gstate = gen.get_state();
    auto bytes = gstate.data_ptr<uint8_t>();
    d.rng_state["torch_cpu"] = std::vector<uint8_t>(bytes, bytes + gstate.numel());
    return d;
}

void restore_parameters(MultimodalModel& model, const CheckpointData& data) {
    torch::NoGradGuard ng;
    for (const auto& p : model->named_parameters()) {
        auto it = data.params.find(p.key());
        if (it == data.params.end()) throw IncompatibleConfig("checkpoint lacks parameter " + p.key());
        if (it->second.sizes() != p.value().sizes())
            throw IncompatibleConfig("parameter shape mismatch for " + p.key());
        p.value().copy_(it->second);
    }
}

void restore_optimizer(torch::optim::AdamW& optimizer, const MultimodalModel& model,
                       const CheckpointData& data) {
    for (const auto& p : model->named_parameters()) {
        auto it = data.opt_state.find(p.key());
        if (it == data.opt_state.end()) continue;
        auto st = std::make_unique<torch::optim::AdamWParamState>();
        st->step(it->second.step);
        st->exp_avg(it->second.exp_avg.clone());
        st->exp_avg_sq(it->second.exp_avg_sq.clone());
        optimizer.state()[p.value().unsafeGetTensorImpl()] = std::move(st);
    }
}

void restore_rng(const CheckpointData& data) {
    auto it = data.rng_state.find("torch_cpu");
    if (it == data.rng_state.end()) return;
    auto gen = at::detail::getDefaultCPUGenerator();
    auto state = torch::empty({static_cast<int64_t>(it->second.size())}, torch::kUInt8);
    std::memcpy(state.data_ptr<uint8_t>(), it->second.data(), it->second.size());
    std::lock_guard<std::mutex> lock(gen.mutex());
    gen.set_state(state);
}

MultimodalModel model_from_checkpoint(const CheckpointData& data) {
    auto tokenizer = Tokenizer::from_tokens(data.vocab_tokens);
    MultimodalModel model(data.config, tokenizer.vocab_size());
    restore_parameters(model, data);
    return model;
}

void check_shape_compatible(const RunConfig& a, const RunConfig& b) {
    auto ka = a.to_kv();
    auto kb = b.to_kv();
    for (const auto& key : RunConfig::shape_keys()) {
        if (ka.at(key) != kb.at(key))
            throw IncompatibleConfig("config key '" + key + "' differs: " + ka.at(key) + " vs " + kb.at(key));
    }
}

} // namespace retfuse

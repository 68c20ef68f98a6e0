#include "retfuse/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "retfuse/errors.hpp"

namespace retfuse {

namespace {

struct Field {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

int64_t parse_i64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int64_t r = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected integer, got '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected unsigned integer, got '" + v + "'");
    }
}

double parse_f64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("key '" + key + "': expected boolean 0/1, got '" + v + "'");
}

#define F_I64(KEY, MEMBER) \
    Field{KEY, [](const RunConfig& c) { return std::to_string(c.MEMBER); }, \
          [](RunConfig& c, const std::string& v) { c.MEMBER = parse_i64(KEY, v); }}
#define F_U64(KEY, MEMBER) \
    Field{KEY, [](const RunConfig& c) { return std::to_string(c.MEMBER); }, \
          [](RunConfig& c, const std::string& v) { c.MEMBER = parse_u64(KEY, v); }}
#define F_F64(KEY, MEMBER) \
    Field{KEY, [](const RunConfig& c) { return fmt_double(c.MEMBER); }, \
          [](RunConfig& c, const std::string& v) { c.MEMBER = parse_f64(KEY, v); }}
#define F_BOOL(KEY, MEMBER) \
    Field{KEY, [](const RunConfig& c) { return std::string(c.MEMBER ? "1" : "0"); }, \
          [](RunConfig& c, const std::string& v) { c.MEMBER = parse_bool(KEY, v); }}
#define F_STR(KEY, MEMBER) \
    Field{KEY, [](const RunConfig& c) { return c.MEMBER; }, \
          [](RunConfig& c, const std::string& v) { c.MEMBER = v; }}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        F_I64("model.dim", model_dim),
        F_F64("model.temperature", temperature),
        F_I64("vision.image_side", vision.image_side),
        F_I64("vision.patch_size", vision.patch_size),
        F_I64("vision.backbone_depth", vision.backbone_depth),
        F_I64("vision.backbone_hidden", vision.backbone_hidden),
        F_I64("vision.backbone_heads", vision.backbone_heads),
        F_I64("vision.freeze_depth", vision.freeze_depth),
        F_I64("text.max_tokens", text.max_tokens),
        F_I64("text.kept_tokens", text.kept_tokens),
        F_I64("text.backbone_hidden", text.backbone_hidden),
        F_I64("text.backbone_depth", text.backbone_depth),
        F_I64("text.backbone_heads", text.backbone_heads),
        F_I64("text.freeze_depth", text.freeze_depth),
        F_I64("structured.input_dim", structured.input_dim),
        F_I64("structured.hidden1", structured.hidden1),
        F_I64("structured.hidden2", structured.hidden2),
        F_F64("structured.dropout", structured.dropout),
        F_I64("fusion.layers", fusion.layers),
        F_I64("fusion.heads", fusion.heads),
        F_I64("fusion.ffn_mult", fusion.ffn_mult),
        F_BOOL("fusion.prenorm", fusion.prenorm),
        F_BOOL("fusion.positional", fusion.positional),
        F_I64("decoder.image_side", decoder.image_side),
        F_I64("decoder.image_base_channels", decoder.image_base_channels),
        F_I64("decoder.text_layers", decoder.text_layers),
        F_I64("decoder.text_heads", decoder.text_heads),
        F_F64("train.learning_rate", train.learning_rate),
        F_F64("train.weight_decay", train.weight_decay),
        F_F64("train.clip_norm", train.clip_norm),
        F_I64("train.batch_size", train.batch_size),
        F_I64("train.max_epochs", train.max_epochs),
        F_I64("train.max_steps", train.max_steps),
        F_I64("train.early_stop_patience", train.early_stop_patience),
        F_I64("train.scheduler_patience", train.scheduler_patience),
        F_F64("train.scheduler_factor", train.scheduler_factor),
        F_F64("train.improve_threshold", train.improve_threshold),
        F_U64("train.seed", train.seed),
        F_BOOL("train.use_image", train.use_image),
        F_BOOL("train.use_text", train.use_text),
        F_BOOL("train.use_structured", train.use_structured),
        F_BOOL("train.loss_img_txt", train.loss_img_txt),
        F_BOOL("train.loss_img_str", train.loss_img_str),
        F_BOOL("train.loss_txt_str", train.loss_txt_str),
        F_BOOL("train.loss_rec_img", train.loss_rec_img),
        F_BOOL("train.loss_rec_txt", train.loss_rec_txt),
        F_BOOL("train.loss_cls", train.loss_cls),
        F_STR("data.manifest", manifest_path),
        F_STR("data.templates", templates_path),
        F_STR("data.vocab", vocab_path),
        F_STR("data.out", out_dir),
    };
    return f;
}

#undef F_I64
#undef F_U64
#undef F_F64
#undef F_BOOL
#undef F_STR

} // namespace

std::map<std::string, std::string> RunConfig::to_kv() const {
    std::map<std::string, std::string> kv;
    for (const auto& f : fields()) kv[f.key] = f.get(*this);
    return kv;
}

std::string RunConfig::to_text() const {
    std::string out;
    for (const auto& [k, v] : to_kv()) out += k + "=" + v + "\n";
    return out;
}

RunConfig RunConfig::from_kv(const std::map<std::string, std::string>& kv) {
    RunConfig c;
    for (const auto& [k, v] : kv) {
        bool known = false;
        for (const auto& f : fields()) {
            if (f.key == k) {
                f.set(c, v);
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError("unknown config key '" + k + "'");
    }
    return c;
}

RunConfig RunConfig::from_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + " is not key=value: '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return from_kv(kv);
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

void RunConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config: " + path);
    out << to_text();
}

void RunConfig::validate() const {
    auto require = [](bool ok, const std::string& why) {
        if (!ok) throw ConfigError("invalid config: " + why);
    };
    require(model_dim > 0, "model.dim must be positive");
    require(temperature > 0, "model.temperature must be positive");
    require(vision.image_side % vision.patch_size == 0, "vision.image_side must be divisible by vision.patch_size");
    require(vision.freeze_depth <= vision.backbone_depth, "vision.freeze_depth exceeds backbone depth");
    require(vision.backbone_hidden % vision.backbone_heads == 0, "vision backbone hidden not divisible by heads");
    require(text.kept_tokens <= text.max_tokens, "text.kept_tokens must not exceed text.max_tokens");
    require(text.freeze_depth <= text.backbone_depth, "text.freeze_depth exceeds backbone depth");
    require(text.backbone_hidden % text.backbone_heads == 0, "text backbone hidden not divisible by heads");
    require(fusion.layers > 0 && fusion.heads > 0, "fusion layers/heads must be positive");
    require(model_dim % fusion.heads == 0, "model.dim must be divisible by fusion.heads");
    require(model_dim % decoder.text_heads == 0, "model.dim must be divisible by decoder.text_heads");
    require(structured.input_dim == 6, "structured.input_dim is fixed at 6");
    require(structured.dropout >= 0 && structured.dropout < 1, "structured.dropout must be in [0,1)");
    require(train.learning_rate > 0 && train.clip_norm > 0 && train.batch_size > 0, "train values must be positive");
    require(train.max_epochs > 0 && train.early_stop_patience > 0 && train.scheduler_patience > 0,
            "train epoch/patience values must be positive");
    require(train.scheduler_factor > 0 && train.scheduler_factor < 1, "train.scheduler_factor must be in (0,1)");
    require(train.use_image || train.use_text || train.use_structured, "at least one modality must be enabled");
    bool any_loss = train.loss_img_txt || train.loss_img_str || train.loss_txt_str || train.loss_rec_img ||
                    train.loss_rec_txt || train.loss_cls;
    require(any_loss, "at least one loss term must be enabled");
    // decoder image side must factor as seed * 2^k with a small seed
    int64_t side = decoder.image_side;
    require(side > 0, "decoder.image_side must be positive");
    while (side % 2 == 0 && side > 8) side /= 2;
    require(side <= 8, "decoder.image_side must reduce to a seed of at most 8 by halving");
}

const std::vector<std::string>& RunConfig::shape_keys() {
    static const std::vector<std::string> keys = {
        "model.dim",
        "vision.image_side", "vision.patch_size", "vision.backbone_depth", "vision.backbone_hidden",
        "vision.backbone_heads",
        "text.max_tokens", "text.kept_tokens", "text.backbone_hidden", "text.backbone_depth", "text.backbone_heads",
        "structured.input_dim", "structured.hidden1", "structured.hidden2",
        "fusion.layers", "fusion.heads", "fusion.ffn_mult", "fusion.prenorm", "fusion.positional",
        "decoder.image_side", "decoder.image_base_channels", "decoder.text_layers", "decoder.text_heads",
    };
    return keys;
}

} // namespace retfuse

#include "mtnet/config.hpp"

#include <fstream>

namespace mtnet {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::int64_t to_i64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const std::int64_t r = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
}

double to_f64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::runtime_error("config: key '" + key + "' expects true/false, got '" + v + "'");
}

}  // namespace

std::map<std::string, std::string> parse_kv_string(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: line " + std::to_string(lineno) +
                                     " is not of the form key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw std::runtime_error("config: empty key on line " + std::to_string(lineno));
        kv[key] = val;
    }
    return kv;
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_kv_string(ss.str());
}

void apply_model_config(ModelConfig& mc, const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) {
        if (k == "stage_channels") {
            std::istringstream is(v);
            std::string tok;
            int i = 0;
            while (std::getline(is, tok, ',')) {
                if (i >= 4) throw std::runtime_error("config: stage_channels expects 4 values");
                mc.stage_channels[i++] = to_i64(k, trim(tok));
            }
            if (i != 4) throw std::runtime_error("config: stage_channels expects 4 values");
        } else if (k == "window_m") mc.window_m = to_i64(k, v);
        else if (k == "sr_ratio3") mc.sr_ratio3 = to_i64(k, v);
        else if (k == "sr_ratio4") mc.sr_ratio4 = to_i64(k, v);
        else if (k == "heads") mc.heads = to_i64(k, v);
        else if (k == "clip_len") mc.clip_len = to_i64(k, v);
        else if (k == "train_clip_len") mc.train_clip_len = to_i64(k, v);
        else if (k == "input_side") mc.input_side = to_i64(k, v);
        else if (k == "lambda") mc.lambda = to_f64(k, v);
        else if (k == "mtt_depth") mc.mtt_depth = to_i64(k, v);
        else if (k == "mtt_enabled") mc.mtt_enabled = to_bool(k, v);
        else if (k == "shared_encoder") mc.shared_encoder = to_bool(k, v);
        else if (k == "positional_encoding") mc.positional_encoding = to_bool(k, v);
        else if (k == "decoder_norm") mc.decoder_norm = v;
        // Training keys are applied separately from the same file.
        else if (k == "seed" || k == "steps" || k == "lr" || k == "beta1" || k == "beta2" ||
                 k == "weight_decay" || k == "reverse_augment" || k == "object_shape" ||
                 k == "trajectory" || k == "velocity" || k == "distractors" ||
                 k == "noise_sigma") continue;
        else throw std::runtime_error("config: unknown key '" + k + "'");
    }
    mc.validate();
}

void apply_train_config(TrainConfig& tc, const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) {
        if (k == "seed") tc.seed = static_cast<std::uint64_t>(to_i64(k, v));
        else if (k == "steps") tc.steps = to_i64(k, v);
        else if (k == "lr") tc.lr = to_f64(k, v);
        else if (k == "beta1") tc.beta1 = to_f64(k, v);
        else if (k == "beta2") tc.beta2 = to_f64(k, v);
        else if (k == "weight_decay") tc.weight_decay = to_f64(k, v);
        else if (k == "reverse_augment") tc.reverse_augment = to_bool(k, v);
        else if (k == "object_shape") tc.object_shape = v;
        else if (k == "trajectory") tc.trajectory = v;
        else if (k == "velocity") tc.velocity = to_f64(k, v);
        else if (k == "distractors") tc.distractors = to_i64(k, v);
        else if (k == "noise_sigma") tc.noise_sigma = to_f64(k, v);
        // Model keys handled by apply_model_config.
    }
    if (tc.steps < 0) throw std::runtime_error("config: steps must be >= 0");
    if (tc.lr <= 0) throw std::runtime_error("config: lr must be > 0");
}

}  // namespace mtnet

#include "ospn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ospn/error.hpp"
#include "ospn/strings.hpp"

namespace ospn {

namespace {

using json = nlohmann::json;

constexpr const char* kMagic = "OSPN1";

void append_doubles_le(std::string& out, const Tensor& t) {
    for (double v : t.data) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int b = 0; b < 8; ++b) {
            out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
        }
    }
}

void read_doubles_le(const std::string& payload, std::size_t& offset, Tensor& t) {
    for (double& v : t.data) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(payload[offset + b]))
                    << (8 * b);
        }
        offset += 8;
        v = std::bit_cast<double>(bits);
    }
}

std::string build_payload(const SupernetModel& model) {
    std::string payload;
    std::size_t total = 0;
    for (const ParamTensor& p : model.params) total += p.value.numel() * 3 * 8;
    payload.reserve(total);
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        append_doubles_le(payload, model.params[i].value);
        append_doubles_le(payload, model.adam.m[i]);
        append_doubles_le(payload, model.adam.v[i]);
    }
    return payload;
}

} // namespace

void save_checkpoint(const SupernetModel& model, const RunConfig& config, const std::string& path,
                     const std::optional<SparsityConfig>& extracted_config) {
    const std::string payload = build_payload(model);

    json manifest;
    manifest["format"] = kMagic;
    manifest["arch"] = {{"input_dim", model.arch.input_dim},
                        {"hidden_width", model.arch.hidden_width},
                        {"num_hidden_layers", model.arch.num_hidden_layers},
                        {"num_classes", model.arch.num_classes}};
    manifest["train_steps"] = model.train_steps;
    manifest["adam"] = {{"lr", model.adam.lr},
                        {"beta1", model.adam.beta1},
                        {"beta2", model.adam.beta2},
                        {"eps", model.adam.eps},
                        {"step_count", model.adam.step_count}};
    // All randomness is derived from (seed, step counter), so this pair IS
    // the RNG state a resumed run needs.
    manifest["rng_state"] = {{"scheme", "seed-step-counter"},
                             {"seed", config.train.seed},
                             {"next_step", model.train_steps}};
    json echo = json::object();
    for (const auto& [k, v] : config.echo()) echo[k] = v;
    manifest["config_echo"] = echo;
    if (extracted_config) manifest["extracted_config"] = extracted_config->str();
    json params = json::array();
    for (const ParamTensor& p : model.params) {
        params.push_back({{"id", p.id}, {"shape", p.value.shape}});
    }
    manifest["params"] = params;
    manifest["payload"] = {{"bytes", payload.size()}, {"checksum", to_hex(fnv1a64(payload.data(), payload.size()))}};

    const std::string manifest_text = manifest.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << kMagic << '\n';
    const std::uint64_t mlen = manifest_text.size();
    char lenbuf[8];
    for (int b = 0; b < 8; ++b) lenbuf[b] = static_cast<char>((mlen >> (8 * b)) & 0xff);
    out.write(lenbuf, 8);
    out.write(manifest_text.data(), static_cast<std::streamsize>(manifest_text.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    std::string magic;
    if (!std::getline(in, magic)) throw CorruptionError(path + ": empty file");
    if (magic != kMagic) {
        throw FormatVersionError(path + ": unknown checkpoint version '" + magic + "'");
    }
    char lenbuf[8];
    if (!in.read(lenbuf, 8)) throw CorruptionError(path + ": truncated manifest length");
    std::uint64_t mlen = 0;
    for (int b = 0; b < 8; ++b) {
        mlen |= static_cast<std::uint64_t>(static_cast<unsigned char>(lenbuf[b])) << (8 * b);
    }
    std::string manifest_text(mlen, '\0');
    if (!in.read(manifest_text.data(), static_cast<std::streamsize>(mlen))) {
        throw CorruptionError(path + ": truncated manifest");
    }
    json manifest;
    try {
        manifest = json::parse(manifest_text);
    } catch (const json::exception& e) {
        throw CorruptionError(path + ": bad manifest: " + e.what());
    }
    if (manifest.value("format", "") != kMagic) {
        throw FormatVersionError(path + ": manifest declares version '" +
                                 manifest.value("format", "") + "'");
    }

    const std::size_t payload_bytes = manifest.at("payload").at("bytes").get<std::size_t>();
    std::string payload(payload_bytes, '\0');
    if (!in.read(payload.data(), static_cast<std::streamsize>(payload_bytes))) {
        throw CorruptionError(path + ": truncated payload");
    }
    const std::string checksum = to_hex(fnv1a64(payload.data(), payload.size()));
    if (checksum != manifest.at("payload").at("checksum").get<std::string>()) {
        throw CorruptionError(path + ": payload checksum mismatch");
    }

    Checkpoint ckpt;
    std::map<std::string, std::string> echo;
    for (const auto& [k, v] : manifest.at("config_echo").items()) {
        echo[k] = v.get<std::string>();
    }
    ckpt.config = RunConfig::from_echo(echo);

    ModelArch arch;
    arch.input_dim = manifest.at("arch").at("input_dim").get<std::size_t>();
    arch.hidden_width = manifest.at("arch").at("hidden_width").get<std::size_t>();
    arch.num_hidden_layers = manifest.at("arch").at("num_hidden_layers").get<std::size_t>();
    arch.num_classes = manifest.at("arch").at("num_classes").get<std::size_t>();

    AdamState hyper;
    hyper.lr = manifest.at("adam").at("lr").get<double>();
    hyper.beta1 = manifest.at("adam").at("beta1").get<double>();
    hyper.beta2 = manifest.at("adam").at("beta2").get<double>();
    hyper.eps = manifest.at("adam").at("eps").get<double>();

    SupernetModel model = SupernetModel::create(arch, hyper, 0);
    const json& params = manifest.at("params");
    if (params.size() != model.params.size()) {
        throw CorruptionError(path + ": manifest declares " + std::to_string(params.size()) +
                              " params, architecture implies " + std::to_string(model.params.size()));
    }
    std::size_t expected_bytes = 0;
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        const auto shape = params[i].at("shape").get<std::vector<std::size_t>>();
        if (params[i].at("id").get<std::string>() != model.params[i].id ||
            shape != model.params[i].value.shape) {
            throw CorruptionError(path + ": parameter table does not match architecture");
        }
        expected_bytes += model.params[i].value.numel() * 3 * 8;
    }
    if (expected_bytes != payload_bytes) {
        throw CorruptionError(path + ": payload size does not match parameter table");
    }
    std::size_t offset = 0;
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        read_doubles_le(payload, offset, model.params[i].value);
        read_doubles_le(payload, offset, model.adam.m[i]);
        read_doubles_le(payload, offset, model.adam.v[i]);
    }
    model.adam.step_count = manifest.at("adam").at("step_count").get<long>();
    model.train_steps = manifest.at("train_steps").get<long>();

    ckpt.model = std::move(model);
    if (manifest.contains("extracted_config")) {
        ckpt.extracted_config = SparsityConfig::parse(manifest.at("extracted_config").get<std::string>());
    }
    return ckpt;
}

SupernetModel extract_subnet(const SupernetModel& model, const SparsityConfig& config) {
    if (config.size() != model.arch.num_hidden_layers) {
        throw ValueError("extract config has " + std::to_string(config.size()) +
                         " entries, model has " + std::to_string(model.arch.num_hidden_layers));
    }
    const std::vector<BlockMask> masks = compute_masks(model, config.ratios);
    SupernetModel out = model;
    for (std::size_t l = 0; l < masks.size(); ++l) {
        Tensor& w = out.params[out.hidden_w_index(l)].value;
        for (std::size_t r = 0; r < w.rows(); ++r) {
            for (std::size_t c = 0; c < w.cols(); ++c) {
                if (!masks[l].keep_weight(r, c)) w.at(r, c) = 0.0;
            }
        }
    }
    return out;
}

void write_metrics_csv(const std::vector<StepMetrics>& metrics, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "step,cap,config_1,config_2,config_3,config_4,"
           "loss_1,loss_2,loss_3,loss_4,wall_ms,batch_equivalents\n";
    for (const StepMetrics& m : metrics) {
        out << m.step << ',' << format_double(m.cap);
        for (std::size_t i = 0; i < 4; ++i) {
            out << ',' << (i < m.subnets.size() ? m.subnets[i].config.str() : "");
        }
        for (std::size_t i = 0; i < 4; ++i) {
            out << ',' << (i < m.subnets.size() ? format_double(m.subnets[i].loss) : "");
        }
        out << ',' << format_double(m.wall_ms) << ',' << format_double(m.batch_equivalents) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

void write_front_csv(const ParetoFront& front, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "config,size_bytes,val_loss\n";
    for (const Candidate& c : front.sorted_members()) {
        out << c.config.str() << ',' << c.size_bytes << ',' << format_double(c.val_loss) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

std::vector<Candidate> read_front_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ":1: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "config,size_bytes,val_loss") {
        throw ParseError(path + ":1: expected header config,size_bytes,val_loss");
    }
    std::vector<Candidate> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cells = split(line, ',');
        if (cells.size() != 3) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected 3 cells");
        }
        try {
            Candidate c;
            c.config = SparsityConfig::parse(cells[0]);
            c.size_bytes = static_cast<std::size_t>(parse_int(cells[1]));
            c.val_loss = parse_double(cells[2]);
            out.push_back(std::move(c));
        } catch (const ParseError& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_plot_csv(std::vector<Candidate> candidates, const std::string& path) {
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.size_bytes != b.size_bytes) return a.size_bytes < b.size_bytes;
        return a.config < b.config;
    });
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "size_bytes,val_loss\n";
    for (const Candidate& c : candidates) {
        out << c.size_bytes << ',' << format_double(c.val_loss) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

} // namespace ospn

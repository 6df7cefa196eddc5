#include "ospn/runconfig.hpp"

#include <fstream>

#include "ospn/error.hpp"
#include "ospn/strings.hpp"

namespace ospn {

namespace {

std::string ratios_str(const std::vector<double>& ratios) {
    std::string out;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (i) out += ';';
        out += format_double(ratios[i]);
    }
    return out;
}

std::vector<double> parse_ratios(const std::string& text) {
    std::vector<double> out;
    for (const std::string& tok : split(text, ';')) {
        out.push_back(parse_double(tok));
    }
    return out;
}

} // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return from_lines(lines, path);
}

RunConfig RunConfig::from_lines(const std::vector<std::string>& lines, const std::string& origin) {
    RunConfig cfg;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string stripped = trim(lines[i]);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ParseError(origin + ":" + std::to_string(i + 1) + ": expected key=value");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        try {
            cfg.apply(key, value);
        } catch (const ParseError& e) {
            throw ParseError(origin + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

void RunConfig::apply(const std::string& key, const std::string& value) {
    if (key == "input_dim") arch.input_dim = static_cast<std::size_t>(parse_int(value));
    else if (key == "hidden_width") arch.hidden_width = static_cast<std::size_t>(parse_int(value));
    else if (key == "num_hidden_layers") arch.num_hidden_layers = static_cast<std::size_t>(parse_int(value));
    else if (key == "num_classes") arch.num_classes = static_cast<std::size_t>(parse_int(value));
    else if (key == "space") space_ratios = parse_ratios(value);
    else if (key == "mode") train.mode = parse_train_mode(value);
    else if (key == "batch_size") train.batch_size = static_cast<std::size_t>(parse_int(value));
    else if (key == "lr") train.lr = parse_double(value);
    else if (key == "total_steps") train.total_steps = parse_int(value);
    else if (key == "kd_weight") train.kd_weight = parse_double(value);
    else if (key == "kd_temperature") train.kd_temperature = parse_double(value);
    else if (key == "final_max_sparsity") train.schedule.final_max_sparsity = parse_double(value);
    else if (key == "ramp_steps") train.schedule.ramp_steps = parse_int(value);
    else if (key == "update_interval") train.schedule.update_interval = parse_int(value);
    else if (key == "seed") train.seed = static_cast<std::uint64_t>(parse_int(value));
    else if (key == "uniform_sparsity") train.uniform_sparsity = parse_double(value);
    else if (key == "dsnn_ratios") train.dsnn_ratios = parse_ratios(value);
    else if (key == "data_seed") data_seed = static_cast<std::uint64_t>(parse_int(value));
    else if (key == "data_n") data_n = static_cast<std::size_t>(parse_int(value));
    else if (key == "data_noise") data_noise = parse_double(value);
    else if (key == "teacher_width") teacher_width = static_cast<std::size_t>(parse_int(value));
    else if (key == "train_csv") train_csv = value;
    else if (key == "val_csv") val_csv = value;
    else if (key == "search_initial_population") search.initial_population = static_cast<std::size_t>(parse_int(value));
    else if (key == "search_children_per_iter") search.children_per_iter = static_cast<std::size_t>(parse_int(value));
    else if (key == "search_mutation_prob") search.mutation_prob = parse_double(value);
    else if (key == "search_crossover_fraction") search.crossover_fraction = parse_double(value);
    else if (key == "out_dir") out_dir = value;
    else throw ParseError("unknown key '" + key + "'");
}

std::map<std::string, std::string> RunConfig::echo() const {
    std::map<std::string, std::string> kv;
    kv["input_dim"] = std::to_string(arch.input_dim);
    kv["hidden_width"] = std::to_string(arch.hidden_width);
    kv["num_hidden_layers"] = std::to_string(arch.num_hidden_layers);
    kv["num_classes"] = std::to_string(arch.num_classes);
    kv["space"] = ratios_str(space_ratios);
    kv["mode"] = train_mode_name(train.mode);
    kv["batch_size"] = std::to_string(train.batch_size);
    kv["lr"] = format_double(train.lr);
    kv["total_steps"] = std::to_string(train.total_steps);
    kv["kd_weight"] = format_double(train.kd_weight);
    kv["kd_temperature"] = format_double(train.kd_temperature);
    kv["final_max_sparsity"] = format_double(train.schedule.final_max_sparsity);
    kv["ramp_steps"] = std::to_string(train.schedule.ramp_steps);
    kv["update_interval"] = std::to_string(train.schedule.update_interval);
    kv["seed"] = std::to_string(train.seed);
    kv["uniform_sparsity"] = format_double(train.uniform_sparsity);
    kv["dsnn_ratios"] = ratios_str(train.dsnn_ratios);
    kv["data_seed"] = std::to_string(data_seed);
    kv["data_n"] = std::to_string(data_n);
    kv["data_noise"] = format_double(data_noise);
    kv["teacher_width"] = std::to_string(teacher_width);
    kv["train_csv"] = train_csv;
    kv["val_csv"] = val_csv;
    kv["search_initial_population"] = std::to_string(search.initial_population);
    kv["search_children_per_iter"] = std::to_string(search.children_per_iter);
    kv["search_mutation_prob"] = format_double(search.mutation_prob);
    kv["search_crossover_fraction"] = format_double(search.crossover_fraction);
    kv["out_dir"] = out_dir;
    return kv;
}

RunConfig RunConfig::from_echo(const std::map<std::string, std::string>& kv) {
    RunConfig cfg;
    for (const auto& [key, value] : kv) {
        cfg.apply(key, value);
    }
    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    arch.validate();
    space().validate();
    // Train-time divisibility and schedule constraints are validated by
    // TrainConfig::validate() when a run starts; the ones below must hold for
    // any use of the file.
    if (data_noise < 0.0 || data_noise >= 0.5) throw ValueError("data_noise outside [0,0.5)");
    if (train.uniform_sparsity < 0.0 || train.uniform_sparsity >= 1.0) {
        throw ValueError("uniform_sparsity outside [0,1)");
    }
    train.schedule.validate();
}

SearchSpace RunConfig::space() const {
    SearchSpace s;
    s.num_layers = arch.num_hidden_layers;
    s.allowed_ratios = space_ratios;
    return s;
}

SyntheticSpec RunConfig::synthetic_spec() const {
    SyntheticSpec spec;
    spec.seed = data_seed;
    spec.n = data_n;
    spec.dim = arch.input_dim;
    spec.classes = arch.num_classes;
    spec.teacher_width = teacher_width;
    spec.label_noise = data_noise;
    return spec;
}

std::pair<Dataset, Dataset> RunConfig::load_data() const {
    if (!train_csv.empty() || !val_csv.empty()) {
        if (train_csv.empty() || val_csv.empty()) {
            throw ValueError("train_csv and val_csv must be set together");
        }
        return {load_csv(train_csv, static_cast<int>(arch.num_classes), "train"),
                load_csv(val_csv, static_cast<int>(arch.num_classes), "validation")};
    }
    SyntheticData data = gen_synthetic(synthetic_spec());
    return {std::move(data.train), std::move(data.val)};
}

} // namespace ospn

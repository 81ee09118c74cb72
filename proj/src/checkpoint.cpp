#include "cbound/checkpoint.hpp"

#include "cbound/errors.hpp"
#include "cbound/io.hpp"

#include <json.hpp>

namespace cbound {

using nlohmann::json;

std::string checkpoint_to_json(const GatedModel<double>& model) {
    json j;
    j["format"] = "cbound-checkpoint";
    j["version"] = kCheckpointVersion;
    j["architecture"] = {{"d_in", model.arch.d_in},
                         {"width", model.arch.width},
                         {"ff", model.arch.ff},
                         {"horizon", model.arch.horizon},
                         {"vocab", model.arch.vocab}};
    j["seed"] = model.seed;
    j["theta"] = std::vector<double>(model.theta.begin(), model.theta.end());
    j["z"] = std::vector<double>(model.z.begin(), model.z.end());
    return j.dump() + "\n";
}

GatedModel<double> checkpoint_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        if (j.at("format") != "cbound-checkpoint") throw InputError("not a cbound checkpoint");
        if (j.at("version").get<int>() != kCheckpointVersion)
            throw InputError("unsupported checkpoint version " + j.at("version").dump());
        GatedModel<double> m;
        const json& a = j.at("architecture");
        m.arch.d_in = a.at("d_in").get<int>();
        m.arch.width = a.at("width").get<int>();
        m.arch.ff = a.at("ff").get<std::array<int, 4>>();
        m.arch.horizon = a.at("horizon").get<int>();
        m.arch.vocab = a.at("vocab").get<int>();
        m.arch.validate();
        m.seed = j.at("seed").get<std::uint64_t>();
        const auto theta = j.at("theta").get<std::vector<double>>();
        const auto z = j.at("z").get<std::vector<double>>();
        if (theta.size() != m.arch.parameter_count() || z.size() != theta.size())
            throw InputError("checkpoint parameter count does not match its architecture");
        m.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
        m.z = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
        return m;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw InputError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const GatedModel<double>& model) {
    atomic_write_file(path, checkpoint_to_json(model));
}

GatedModel<double> load_checkpoint(const std::filesystem::path& path) {
    return checkpoint_from_json(read_file(path));
}

}  // namespace cbound

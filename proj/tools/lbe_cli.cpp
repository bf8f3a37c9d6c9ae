#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lbe/commands.hpp"
#include "lbe/config.hpp"

namespace {

struct Flags {
    std::string config_file;
    std::vector<std::string> sets;
    std::string lambda, seed, workers, out;
};

std::string keys_text() {
    std::ostringstream os;
    os << "Config keys ([section] key = value in the config file, or --set section.key=value):\n";
    for (const auto& k : lbe::config_keys()) os << "  " << k.name << " (" << k.type << "): " << k.help << "\n";
    os << "model.eta is fixed. Environment: LBE_OUTPUT_DIR, LBE_WORKERS. Precedence: file < environment < flags.";
    return os.str();
}

int config_error(const std::string& msg) {
    const nlohmann::json j = {{"schema_version", 1},
                              {"pass", false},
                              {"failure", {{"code", "config_error"}, {"message", msg}, {"failed", nlohmann::json::array()}}}};
    std::cerr << j.dump() << "\n";
    return lbe::kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heavy-particle linear Boltzmann simulator and limit-theorem checks"};
    app.require_subcommand(0, 1);
    bool list_keys = false;
    app.add_flag("--list-keys", list_keys, "Print every config key and exit");
    app.footer("Run 'lbe <command> --help' for the output schema of a command.");

    std::map<std::string, Flags> flags;
    for (const auto& name : lbe::command_names()) {
        Flags& f = flags[name];
        CLI::App* sub = app.add_subcommand(name, lbe::command_summary(name));
        sub->add_option("-c,--config", f.config_file, "INI config file")->check(CLI::ExistingFile);
        sub->add_option("--set", f.sets, "Override section.key=value (repeatable)");
        sub->add_option("--lambda", f.lambda, "Same as --set model.lambda=...");
        sub->add_option("--seed", f.seed, "Same as --set run.seed=...");
        sub->add_option("--workers", f.workers, "Same as --set run.workers=...");
        sub->add_option("-o,--out", f.out, "Same as --set run.output_dir=...");
        sub->footer(lbe::command_schema(name));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : lbe::kExitConfig;
    }
    if (list_keys) {
        std::cout << keys_text() << "\n";
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cout << app.help();
        return lbe::kExitConfig;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    const Flags& f = flags.at(command);

    lbe::RunConfig cfg;
    try {
        std::vector<lbe::Assignment> as;
        if (!f.config_file.empty()) as = lbe::read_config_file(f.config_file);
        for (auto& a : lbe::environment_overrides()) as.push_back(a);
        if (!f.lambda.empty()) as.emplace_back("model.lambda", f.lambda);
        if (!f.seed.empty()) as.emplace_back("run.seed", f.seed);
        if (!f.workers.empty()) as.emplace_back("run.workers", f.workers);
        if (!f.out.empty()) as.emplace_back("run.output_dir", f.out);
        for (const auto& s : f.sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw lbe::ConfigError("--set expects section.key=value, got '" + s + "'");
            as.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        cfg = lbe::build_run_config(command, as);
    } catch (const lbe::ConfigError& e) {
        return config_error(e.what());
    }

    const lbe::CommandOutcome out = lbe::run_command(cfg, std::cerr);
    if (out.exit_code != lbe::kExitOk) std::cerr << out.report["failure"].dump() << "\n";
    return out.exit_code;
}

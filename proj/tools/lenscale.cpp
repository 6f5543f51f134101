// lenscale: parameter solving, design curves, 1D checks, robust heat-sink
// optimization and length-scale measurement from one entry point.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lenscale/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Minimum length scale tools for robust density-based topology optimization"};
    app.set_version_flag("--version", std::string(LENSCALE_VERSION));
    app.require_subcommand(1);

    lenscale::cli::Options opt;
    std::string config, out = "out", raster;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "JSON config file");
        sub->add_option("--out", out, "output directory")->capture_default_str();
        sub->add_flag("--record-time", opt.record_time, "record start and finish times in the manifest");
    };
    add_common(app.add_subcommand("solve", "filter radius and thresholds for target length scales"));
    add_common(app.add_subcommand("curves", "analytic (and optionally numeric) design curves"));
    add_common(app.add_subcommand("verify1d", "rounding, cut-off and floor-width studies in 1D"));
    add_common(app.add_subcommand("topopt", "robust heat-sink optimization runs"));
    auto* measure = app.add_subcommand("measure", "minimum solid and void size of a raster design");
    add_common(measure);
    measure->add_option("--raster", raster, "CSV raster to measure")->required();

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();
    if (!config.empty()) opt.config = config;
    if (!raster.empty()) opt.raster = raster;
    opt.out = out;

    try {
        lenscale::cli::run(command, opt, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "lenscale " << command << ": " << e.what() << '\n';
        return 1;
    }
    return 0;
}

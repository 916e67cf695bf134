#include <stbn/cli.h>

#include <stbn/error.h>
#include <stbn/io.h>
#include <stbn/kernels.h>
#include <stbn/parallel.h>
#include <stbn/percept.h>
#include <stbn/swgd.h>
#include <stbn/synth.h>
#include <stbn/tile.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace stbn::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Dims3 parse_dims(const std::string &text, const std::string &key) {
    Dims3 d{};
    char x1 = 0, x2 = 0;
    std::istringstream in(text);
    std::string rest;
    if (!(in >> d.x >> x1 >> d.y >> x2 >> d.t) || (x1 != 'x' && x1 != 'X') || (x2 != 'x' && x2 != 'X') ||
        (in >> rest) || !d.positive())
        throw InvalidParameter("--" + key + ": expected XxYxT with positive sizes, got '" + text + "'");
    return d;
}

std::vector<double> parse_list(const std::string &text, const std::string &key) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception &) {
            throw InvalidParameter("--" + key + ": '" + item + "' is not a number");
        }
    }
    if (out.empty()) throw InvalidParameter("--" + key + ": empty list");
    return out;
}

BoundaryPolicy parse_policy(const std::string &name) {
    for (BoundaryPolicy p :
         {BoundaryPolicy::toroidal, BoundaryPolicy::causal_renormalized, BoundaryPolicy::causal_zero_pad})
        if (name == to_string(p)) return p;
    throw InvalidParameter("--boundary: unknown policy '" + name + "'");
}

// Flat keys of a JSON config become flags inserted ahead of the user's own,
// so the command line wins. Keys may carry a "<subcommand>." prefix.
std::vector<std::string> expand_config(const std::vector<std::string> &args) {
    std::string sub, config;
    std::vector<std::string> rest;
    for (std::size_t i = 1; i < args.size(); ++i) {
        const std::string &a = args[i];
        if (a == "--config") {
            if (i + 1 >= args.size()) throw InvalidParameter("--config needs a file name");
            config = args[++i];
        } else if (a.rfind("--config=", 0) == 0) {
            config = a.substr(9);
        } else {
            if (sub.empty() && !a.empty() && a[0] != '-') sub = a;
            rest.push_back(a);
        }
    }
    std::vector<std::string> out{args.empty() ? std::string("stbn") : args[0]};
    if (config.empty()) {
        out.insert(out.end(), rest.begin(), rest.end());
        return out;
    }

    std::ifstream f(config);
    if (!f) throw IoError("cannot open config '" + config + "'");
    json doc;
    try {
        doc = json::parse(f);
    } catch (const json::parse_error &e) {
        throw InvalidParameter("config '" + config + "': " + e.what());
    }
    if (!doc.is_object()) throw InvalidParameter("config '" + config + "' must be a JSON object");

    std::vector<std::string> injected;
    for (const auto &[key, value] : doc.items()) {
        std::string name = key;
        if (auto dot = key.find('.'); dot != std::string::npos) {
            if (key.substr(0, dot) != sub) continue;
            name = key.substr(dot + 1);
        }
        if (value.is_boolean()) {
            if (value.get<bool>()) injected.push_back("--" + name);
        } else if (value.is_string()) {
            injected.push_back("--" + name);
            injected.push_back(value.get<std::string>());
        } else if (value.is_number()) {
            injected.push_back("--" + name);
            injected.push_back(value.dump());
        } else if (value.is_array()) {
            std::string joined;
            for (const auto &v : value) joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
            injected.push_back("--" + name);
            injected.push_back(joined);
        } else {
            throw InvalidParameter("config key '" + key + "' has an unsupported value type");
        }
    }
    auto it = std::find(rest.begin(), rest.end(), sub);
    const auto pos = it == rest.end() ? rest.end() : it + 1;
    out.insert(out.end(), rest.begin(), pos);
    out.insert(out.end(), injected.begin(), injected.end());
    out.insert(out.end(), pos, rest.end());
    return out;
}

struct OptimizeArgs {
    std::string tile = "128x128x30";
    int spp = 1, dim = 2;
    KernelSpec kernel;
    std::string kernel_name = "percept+taa";
    std::string percept_table;
    OptimizerConfig opt;
    std::string init;
    std::string out = "tile.stbn";
    int log_every = 100;
};

struct EvaluateArgs {
    std::string tile, scene;
    int width = 64, height = 64, frames = 24, frame = 16;
    bool taa = false, no_percept = false;
    double alpha = 0.2, sigma = 2.1, truncation = kDefaultGaussianTruncation, frame_rate = 60.0;
    int taa_taps = 0;
    std::string percept_table, boundary = "causal-renormalized";
    uint64_t baseline_seed = 1;
    std::string out = "metrics.csv", export_pfm;
};

struct SpectrumArgs {
    std::string errors, tile, scene;
    bool white_noise = false, taa = false;
    int width = 64, height = 64, frames = 24, frame = 16, row = -1, crop = 0;
    double alpha = 0.2;
    uint64_t baseline_seed = 1;
    std::string radii = "0.25,0.5", out_dir = ".";
};

void add_kernel_options(CLI::App *app, KernelSpec &k, std::string &table) {
    app->add_option("--sigma", k.sigma, "Spatial Gaussian sigma in pixels")->capture_default_str();
    app->add_option("--truncation", k.truncation, "Gaussian truncation, fraction of the peak")->capture_default_str();
    app->add_option("--alpha", k.alpha, "TAA blend factor")->capture_default_str();
    app->add_option("--taa-taps", k.taa_taps, "Ka taps used for optimization")->capture_default_str();
    app->add_option("--temporal-sigma", k.temporal_sigma, "Frames, for --kernel gaussian")->capture_default_str();
    app->add_option("--frame-rate", k.frame_rate, "Hz, for the built-in Kt")->capture_default_str();
    app->add_option("--percept-table", table, "Kt table file replacing the built-in model");
}

json kernel_json(const KernelSpec &k) {
    return {{"kernel", to_string(k.preset)},
            {"sigma", k.sigma},
            {"truncation", k.truncation},
            {"alpha", k.alpha},
            {"taa-taps", k.taa_taps},
            {"temporal-sigma", k.temporal_sigma},
            {"frame-rate", k.frame_rate},
            {"percept-table", k.percept_table.string()}};
}

json optimizer_json(const OptimizerConfig &c) {
    return {{"iters", c.iterations}, {"batch", c.batch_size},      {"lr", c.learning_rate},
            {"beta1", c.adam_beta1}, {"beta2", c.adam_beta2},      {"eps", c.adam_epsilon},
            {"seed", c.seed},        {"lipschitz", c.lipschitz_scale}, {"threads", c.threads}};
}

fs::path with_suffix(const fs::path &p, const std::string &suffix) {
    fs::path out = p;
    out.replace_extension(suffix);
    return out;
}

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream f(path);
    if (!f || !(f << text)) throw IoError("cannot write '" + path.string() + "'");
}

int run_optimize(OptimizeArgs &a, std::ostream &out, std::ostream &err) {
    a.kernel.preset = parse_kernel_preset(a.kernel_name);
    a.kernel.percept_table = a.percept_table;
    if (a.opt.threads == 0) a.opt.threads = default_thread_count();
    a.opt.validate();
    if (a.spp < 1) throw InvalidParameter("--spp must be >= 1");
    if (a.dim < 1) throw InvalidParameter("--dim must be >= 1");
    if (a.log_every < 1) throw InvalidParameter("--log-every must be >= 1");
    const Dims3 dims = parse_dims(a.tile, "tile");

    const SpatioTemporalKernel kernel = build_kernel(a.kernel);
    SampleTile init = a.init.empty() ? init_random(dims, a.spp, a.dim, a.opt.seed) : read_tile(fs::path(a.init));
    if (!a.init.empty() && (!(init.dims() == dims) || init.spp() != a.spp || init.dim() != a.dim))
        throw ValidationError("--init tile " + init.dims().to_string() + " spp " + std::to_string(init.spp()) +
                              " dim " + std::to_string(init.dim()) + " does not match --tile/--spp/--dim");

    json effective = {{"subcommand", "optimize"}, {"tile", dims.to_string()}, {"spp", a.spp}, {"dim", a.dim},
                      {"init", a.init},           {"out", a.out},             {"log-every", a.log_every}};
    effective.update(kernel_json(a.kernel));
    effective.update(optimizer_json(a.opt));
    out << effective.dump() << '\n';

    const fs::path tile_path(a.out);
    OptimizeResult res = optimize(std::move(init), kernel, a.opt, [&](const ConvergenceEntry &e) {
        if (e.iteration % a.log_every == 0)
            err << "iter " << e.iteration << " objective " << e.objective << " empty " << e.empty_subset_count << '\n';
    });
    for (const auto &w : res.warnings) err << "warning: " << w << '\n';

    write_tile(res.tile, tile_path);
    {
        std::ostringstream csv;
        write_convergence_csv(res.log, csv);
        write_text(with_suffix(tile_path, ".csv"), csv.str());
    }
    json meta = {{"config", effective},
                 {"kernel", kernel.describe()},
                 {"extent", kernel.extent().to_string()},
                 {"iterations_run", res.log.empty() ? 0 : res.log.back().iteration},
                 {"final_objective", res.log.empty() ? 0.0 : res.log.back().objective},
                 {"warnings", res.warnings}};
    write_text(with_suffix(tile_path, ".meta.json"), meta.dump(2) + "\n");
    return kExitOk;
}

PerceptualModel make_model(const EvaluateArgs &a) {
    PerceptualModel m;
    m.ks = make_spatial_gaussian(a.sigma, a.truncation);
    if (!a.no_percept)
        m.kt = a.percept_table.empty() ? make_temporal_percept(a.frame_rate) : load_temporal_percept(a.percept_table);
    if (a.taa) m.ka = make_taa_kernel(a.alpha, a.taa_taps);
    m.policy = parse_policy(a.boundary);
    return m;
}

void check_frame(int frame, int frames) {
    if (frame < 1 || frame > frames)
        throw InvalidParameter("--frame " + std::to_string(frame) + " out of range, valid range is [1, " +
                               std::to_string(frames) + "]");
}

void check_image(int w, int h, int frames) {
    if (w < 1 || h < 1 || frames < 1) throw InvalidParameter("--width/--height/--frames must be positive");
}

int run_evaluate(const EvaluateArgs &a, std::ostream &out, std::ostream &) {
    check_image(a.width, a.height, a.frames);
    check_frame(a.frame, a.frames);
    const TestScene &scene = find_scene(a.scene);
    const PerceptualModel model = make_model(a);
    const SampleTile tile = read_tile(fs::path(a.tile));
    const SampleTile noise =
        init_random(Dims3{a.width, a.height, a.frames}, tile.spp(), tile.dim(), a.baseline_seed);

    json effective = {{"subcommand", "evaluate"}, {"tile", a.tile},       {"scene", a.scene},
                      {"width", a.width},         {"height", a.height},   {"frames", a.frames},
                      {"frame", a.frame},         {"taa", a.taa},         {"alpha", a.alpha},
                      {"taa-taps", a.taa_taps},   {"sigma", a.sigma},     {"truncation", a.truncation},
                      {"no-percept", a.no_percept}, {"frame-rate", a.frame_rate},
                      {"percept-table", a.percept_table}, {"boundary", a.boundary},
                      {"baseline-seed", a.baseline_seed}, {"out", a.out}, {"export-pfm", a.export_pfm}};
    out << effective.dump() << '\n';

    const FrameSequence reference = render_reference(scene, a.width, a.height, a.frames);
    const auto ev_tile = model.evaluate(render_with_tile(scene, tile, a.width, a.height, a.frames), reference);
    const auto ev_noise = model.evaluate(render_with_tile(scene, noise, a.width, a.height, a.frames), reference);

    std::ostringstream csv;
    csv << std::setprecision(10) << "frame,prelmse_tile,prelmse_white_noise,ratio\n";
    for (int f = 1; f <= a.frames; ++f) {
        const double pt = ev_tile.prelmse(f - 1), pn = ev_noise.prelmse(f - 1);
        const double ratio = pn > 0.0 ? pt / pn : (pt > 0.0 ? INFINITY : 1.0);
        csv << f << ',' << pt << ',' << pn << ',' << ratio << '\n';
        if (f == a.frame)
            out << "frame " << f << " prelmse_tile " << pt << " prelmse_white_noise " << pn << " ratio " << ratio
                << '\n';
    }
    write_text(a.out, csv.str());
    if (!a.export_pfm.empty()) {
        write_pfm_stack(a.export_pfm + "_tile", ev_tile.error);
        write_pfm_stack(a.export_pfm + "_white_noise", ev_noise.error);
    }
    return kExitOk;
}

int run_spectrum(const SpectrumArgs &a, std::ostream &out, std::ostream &) {
    const std::vector<double> radii = parse_list(a.radii, "radii");
    for (double r : radii)
        if (!(r > 0.0 && r <= 1.0)) throw InvalidParameter("--radii values must be in (0, 1]");
    const bool from_scene = !a.tile.empty() || a.white_noise;
    if (a.errors.empty() == !from_scene)
        throw InvalidParameter("give either --errors or --scene with --tile and/or --white-noise");
    if (from_scene && a.scene.empty()) throw InvalidParameter("--scene is required with --tile/--white-noise");

    std::vector<std::pair<std::string, FrameSequence>> inputs;
    if (!a.errors.empty()) {
        inputs.emplace_back("errors", read_pfm_stack(a.errors));
    } else {
        check_image(a.width, a.height, a.frames);
        const TestScene &scene = find_scene(a.scene);
        const FrameSequence reference = render_reference(scene, a.width, a.height, a.frames);
        std::optional<TaaKernel> ka;
        if (a.taa) ka = make_taa_kernel(a.alpha);
        auto error_of = [&](const SampleTile &t) {
            FrameSequence raw = render_with_tile(scene, t, a.width, a.height, a.frames);
            if (ka) raw = apply_taa(raw, *ka);
            return raw - reference;
        };
        if (!a.tile.empty()) {
            const SampleTile tile = read_tile(fs::path(a.tile));
            inputs.emplace_back("tile", error_of(tile));
            if (a.white_noise)
                inputs.emplace_back("white_noise", error_of(init_random(Dims3{a.width, a.height, a.frames},
                                                                        tile.spp(), tile.dim(), a.baseline_seed)));
        } else {
            inputs.emplace_back("white_noise",
                                error_of(init_random(Dims3{a.width, a.height, a.frames}, 1, 2, a.baseline_seed)));
        }
    }

    const Dims3 d = inputs.front().second.dims();
    check_frame(a.frame, d.t);
    const int row = a.row < 0 ? d.y / 2 : a.row;
    if (row >= d.y) throw InvalidParameter("--row out of range, valid range is [0, " + std::to_string(d.y - 1) + "]");
    const int crop = a.crop > 0 ? std::min({a.crop, d.x, d.y}) : std::min(d.x, d.y);

    std::error_code ec;
    fs::create_directories(a.out_dir, ec);
    if (ec) throw IoError("cannot create '" + a.out_dir + "': " + ec.message());

    std::ostringstream csv;
    csv << std::setprecision(10) << "input,slice,radius,lowfreq_energy_ratio\n";
    for (const auto &[label, seq] : inputs) {
        const SpectrumImage xy = dft_power(xy_slice(seq, a.frame - 1, 0, 0, crop, crop));
        const SpectrumImage xt = dft_power(xt_slice(seq, row));
        write_spectrum_png(fs::path(a.out_dir) / (label + "_xy.png"), xy);
        write_spectrum_png(fs::path(a.out_dir) / (label + "_xt.png"), xt);
        for (double r : radii) {
            csv << label << ",xy," << r << ',' << lowfreq_energy_ratio(xy, r) << '\n';
            csv << label << ",xt," << r << ',' << lowfreq_energy_ratio(xt, r) << '\n';
        }
    }
    write_text(fs::path(a.out_dir) / "bands.csv", csv.str());
    out << csv.str();
    return kExitOk;
}

int run_info(const std::string &path, std::ostream &out) {
    const SampleTile t = read_tile(fs::path(path));
    json j = {{"file", path},      {"version", kTileVersion}, {"dims", t.dims().to_string()}, {"spp", t.spp()},
              {"dim", t.dim()},    {"seed", t.seed()},        {"samples", t.sample_count()}};
    out << j.dump(2) << '\n';
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    try {
        const std::vector<std::string> argv = expand_config(args);

        CLI::App app{"Spatio-temporal blue-noise sample optimization"};
        app.name(argv.front());
        app.require_subcommand(1);
        app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        app.add_option("--config", "JSON file of flat flag=value keys (flags given here win)");

        OptimizeArgs oa;
        auto *opt = app.add_subcommand("optimize", "Optimize a sample tile");
        opt->add_option("--tile", oa.tile, "Tile size XxYxT")->capture_default_str();
        opt->add_option("--spp", oa.spp, "Samples per cell")->capture_default_str();
        opt->add_option("--dim", oa.dim, "Sample dimension")->capture_default_str();
        opt->add_option("--kernel", oa.kernel_name, "spatial|gaussian|taa|percept|percept+taa")->capture_default_str();
        add_kernel_options(opt, oa.kernel, oa.percept_table);
        opt->add_option("--iters", oa.opt.iterations, "SGD iterations")->capture_default_str();
        opt->add_option("--batch", oa.opt.batch_size, "Kernel instances per iteration")->capture_default_str();
        opt->add_option("--lr", oa.opt.learning_rate, "Adam step size")->capture_default_str();
        opt->add_option("--beta1", oa.opt.adam_beta1)->capture_default_str();
        opt->add_option("--beta2", oa.opt.adam_beta2)->capture_default_str();
        opt->add_option("--eps", oa.opt.adam_epsilon)->capture_default_str();
        opt->add_option("--lipschitz", oa.opt.lipschitz_scale, "Integrand Lipschitz constant (log scale only)")
            ->capture_default_str();
        opt->add_option("--seed", oa.opt.seed, "Master seed")->capture_default_str();
        opt->add_option("--threads", oa.opt.threads, "Worker threads, 0 = all cores")->capture_default_str();
        opt->add_option("--init", oa.init, "Start from this tile instead of a seeded random one");
        opt->add_option("--out", oa.out, "Output tile; .csv log and .meta.json sidecar go next to it")
            ->capture_default_str();
        opt->add_option("--log-every", oa.log_every, "Progress interval on stderr")->capture_default_str();

        EvaluateArgs ea;
        auto *eval = app.add_subcommand("evaluate", "Score a tile against a white-noise baseline");
        eval->add_option("--tile", ea.tile, "Tile file")->required();
        eval->add_option("--scene", ea.scene, "constant|ramp|blob|step")->required();
        eval->add_option("--width", ea.width)->capture_default_str();
        eval->add_option("--height", ea.height)->capture_default_str();
        eval->add_option("--frames", ea.frames)->capture_default_str();
        eval->add_option("--frame", ea.frame, "Reported frame, 1-based")->capture_default_str();
        eval->add_flag("--taa", ea.taa, "Apply TAA before the perceptual filters");
        eval->add_option("--alpha", ea.alpha)->capture_default_str();
        eval->add_option("--taa-taps", ea.taa_taps, "0 = default length for alpha")->capture_default_str();
        eval->add_option("--sigma", ea.sigma)->capture_default_str();
        eval->add_option("--truncation", ea.truncation)->capture_default_str();
        eval->add_flag("--no-percept", ea.no_percept, "Drop the temporal perception kernel");
        eval->add_option("--frame-rate", ea.frame_rate)->capture_default_str();
        eval->add_option("--percept-table", ea.percept_table);
        eval->add_option("--boundary", ea.boundary, "causal-renormalized|causal-zero-pad|toroidal")
            ->capture_default_str();
        eval->add_option("--baseline-seed", ea.baseline_seed)->capture_default_str();
        eval->add_option("--out", ea.out, "Metrics CSV")->capture_default_str();
        eval->add_option("--export-pfm", ea.export_pfm, "Prefix for per-frame error PFMs");

        SpectrumArgs sa;
        auto *spec = app.add_subcommand("spectrum", "Power spectra of XY crops and XT slices");
        spec->add_option("--errors", sa.errors, "Prefix of a PFM error stack (<prefix>_000.pfm, ...)");
        spec->add_option("--tile", sa.tile, "Tile file");
        spec->add_option("--scene", sa.scene);
        spec->add_flag("--white-noise", sa.white_noise, "Also analyse a seeded white-noise render");
        spec->add_flag("--taa", sa.taa);
        spec->add_option("--alpha", sa.alpha)->capture_default_str();
        spec->add_option("--width", sa.width)->capture_default_str();
        spec->add_option("--height", sa.height)->capture_default_str();
        spec->add_option("--frames", sa.frames)->capture_default_str();
        spec->add_option("--frame", sa.frame, "XY frame, 1-based")->capture_default_str();
        spec->add_option("--row", sa.row, "XT row, default height/2");
        spec->add_option("--crop", sa.crop, "XY crop size, 0 = full");
        spec->add_option("--baseline-seed", sa.baseline_seed)->capture_default_str();
        spec->add_option("--radii", sa.radii, "Comma-separated, Nyquist units")->capture_default_str();
        spec->add_option("--out-dir", sa.out_dir)->capture_default_str();

        std::string info_tile;
        auto *info = app.add_subcommand("info", "Print a tile header");
        info->add_option("tile", info_tile, "Tile file")->required();

        std::vector<std::string> reversed(argv.rbegin(), argv.rend() - 1);
        try {
            app.parse(reversed);
        } catch (const CLI::ParseError &e) {
            return app.exit(e, out, err) == 0 ? kExitOk : kExitConfig;
        }

        if (*opt) return run_optimize(oa, out, err);
        if (*eval) return run_evaluate(ea, out, err);
        if (*spec) return run_spectrum(sa, out, err);
        return run_info(info_tile, out);
    } catch (const InvalidParameter &e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const stbn::ParseError &e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const IoError &e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const TileFormatError &e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }
}

}  // namespace stbn::cli

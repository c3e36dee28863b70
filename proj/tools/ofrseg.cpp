#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ofrseg/errors.hpp"
#include "ofrseg/fixture.hpp"
#include "ofrseg/formats.hpp"
#include "ofrseg/metrics.hpp"
#include "ofrseg/numerics.hpp"
#include "ofrseg/propagation.hpp"
#include "ofrseg/selection.hpp"
#include "ofrseg/version.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json null_if_nan(double v) {
    if (std::isnan(v))
        return nullptr;
    return v;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ofr::IoError("cannot create " + path.string());
    out << text;
    if (!out)
        throw ofr::IoError("cannot write " + path.string());
}

std::string mask_file_name(std::size_t frame_index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "mask_%06zu.ofrm", frame_index);
    return buf;
}

std::vector<std::size_t> read_anchor_file(const fs::path& path,
                                          std::size_t frame_count) {
    std::ifstream in(path);
    if (!in)
        throw ofr::IoError("cannot open " + path.string());
    std::vector<std::size_t> anchors;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        std::size_t value = 0;
        try {
            value = std::stoull(line);
        } catch (const std::exception&) {
            throw ofr::ValidationError(path.string() + ":" + std::to_string(line_no) +
                                       ": expected a frame index");
        }
        if (value >= frame_count)
            throw ofr::ValidationError(path.string() + ":" + std::to_string(line_no) +
                                       ": frame index " + std::to_string(value) +
                                       " out of range");
        anchors.push_back(value);
    }
    if (anchors.empty())
        throw ofr::ValidationError(path.string() + ": no anchor indices found");
    return anchors;
}

std::vector<ofr::FeatureGrid> load_features(const ofr::Manifest& manifest) {
    std::vector<ofr::FeatureGrid> grids;
    grids.reserve(manifest.frame_count());
    for (std::size_t i = 0; i < manifest.frame_count(); ++i) {
        ofr::FeatureGrid grid = ofr::read_feature_file(manifest.frames[i].feature_path);
        grid.frame_id = i;
        grids.push_back(std::move(grid));
    }
    return grids;
}

// ---------------------------------------------------------------------------
// gen-fixtures

struct GenFixturesArgs {
    std::size_t frames = 0;
    std::size_t patch_rows = 8;
    std::size_t patch_cols = 8;
    std::size_t dim = 8;
    std::size_t classes = 2;
    std::string motion = "translate";
    double noise = 0.02;
    std::size_t pixels_per_patch = 4;
    std::uint64_t seed = 0;
    std::string out_dir;
};

int run_gen_fixtures(const GenFixturesArgs& args) {
    ofr::FixtureSpec spec;
    spec.frames = args.frames;
    spec.patch_rows = args.patch_rows;
    spec.patch_cols = args.patch_cols;
    spec.dim = args.dim;
    spec.classes = args.classes;
    spec.motion = args.motion == "static" ? ofr::MotionRule::Static
                                          : ofr::MotionRule::Translate;
    spec.noise = args.noise;
    spec.pixels_per_patch = args.pixels_per_patch;

    const fs::path manifest = ofr::generate_fixture(spec, args.seed, args.out_dir);

    json provenance = {
        {"tool", "ofrseg"},
        {"version", ofr::kVersion},
        {"command", "gen-fixtures"},
        {"config",
         {{"frames", args.frames},
          {"patch_rows", args.patch_rows},
          {"patch_cols", args.patch_cols},
          {"dim", args.dim},
          {"classes", args.classes},
          {"motion", args.motion},
          {"noise", args.noise},
          {"pixels_per_patch", args.pixels_per_patch},
          {"seed", args.seed}}}};
    write_text_file(fs::path(args.out_dir) / "provenance.json",
                    provenance.dump(2) + "\n");

    std::cout << manifest.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// select

struct SelectArgs {
    std::string manifest_path;
    std::optional<std::size_t> count;
    std::optional<double> lambda_e;
    std::optional<std::string> sign;
    std::optional<std::size_t> steps;
    std::string scores_path;
    std::string seed_rule = "first-frame";
    std::size_t seed_index = 0;
    bool normalize = false;
    std::string out_path;
};

int run_select(const SelectArgs& args) {
    const ofr::Manifest manifest = ofr::read_manifest(args.manifest_path);
    const std::size_t frames = manifest.frame_count();

    ofr::SelectionConfig config;
    if (args.count)
        config.count = *args.count;
    else if (manifest.config.count)
        config.count = *manifest.config.count;
    else
        throw ofr::ParameterError("--count is required (no manifest default)");

    config.lambda_e = args.lambda_e.value_or(
        manifest.config.lambda_e ? *manifest.config.lambda_e : 0.0);
    const std::string sign = args.sign.value_or(
        manifest.config.sign ? *manifest.config.sign : "promote");
    config.sign = sign == "penalize" ? ofr::UncertaintySign::Penalize
                                     : ofr::UncertaintySign::Promote;
    config.steps = args.steps.value_or(
        manifest.config.steps ? *manifest.config.steps : 1);
    config.normalize_features = args.normalize;
    config.seed_index = args.seed_index;
    if (args.seed_rule == "first-frame")
        config.seed_rule = ofr::SeedRule::FirstFrame;
    else if (args.seed_rule == "given-index")
        config.seed_rule = ofr::SeedRule::GivenIndex;
    else
        config.seed_rule = ofr::SeedRule::MaxNorm;
    config.validate(frames);

    std::optional<ofr::UncertaintyScores> scores;
    if (!args.scores_path.empty()) {
        scores = ofr::read_scores(args.scores_path, frames);
    } else {
        // Fall back to per-frame scores carried by the manifest, when
        // every frame has one.
        ofr::UncertaintyScores from_manifest;
        bool complete = true;
        for (const ofr::FrameEntry& frame : manifest.frames) {
            if (!frame.score) {
                complete = false;
                break;
            }
            from_manifest.values.push_back(*frame.score);
        }
        if (complete && !manifest.frames.empty())
            scores = std::move(from_manifest);
    }
    if (config.lambda_e > 0.0 && !scores)
        throw ofr::ParameterError(
            "--lambda-e > 0 needs uncertainty scores (--scores or manifest)");

    const std::vector<ofr::FeatureGrid> grids = load_features(manifest);
    std::vector<ofr::FrameSummaryVector> summaries;
    summaries.reserve(grids.size());
    for (const ofr::FeatureGrid& grid : grids)
        summaries.push_back(ofr::mean_pool(grid));

    ofr::ScoresProvider provider =
        [&scores, frames](const std::vector<std::size_t>&) {
            if (scores)
                return *scores;
            ofr::UncertaintyScores zeros;
            zeros.values.assign(frames, 0.0);
            return zeros;
        };

    std::vector<ofr::PickTrace> trace;
    const std::vector<std::size_t> anchors =
        ofr::select_stepped(summaries, provider, config, &trace);

    std::string lines;
    for (std::size_t index : anchors)
        lines += std::to_string(index) + "\n";
    write_text_file(args.out_path, lines);

    json picks = json::array();
    for (const ofr::PickTrace& pick : trace) {
        picks.push_back({{"frame", pick.frame},
                         {"round", pick.round},
                         {"seeded", pick.seeded},
                         {"min_dist", null_if_nan(pick.min_dist)},
                         {"uncertainty", null_if_nan(pick.uncertainty)},
                         {"combined", null_if_nan(pick.combined)}});
    }
    json provenance = {
        {"tool", "ofrseg"},
        {"version", ofr::kVersion},
        {"command", "select"},
        {"config",
         {{"manifest", args.manifest_path},
          {"count", config.count},
          {"lambda_e", config.lambda_e},
          {"sign", sign},
          {"steps", config.steps},
          {"seed_rule", args.seed_rule},
          {"seed_index", args.seed_index},
          {"normalize", config.normalize_features},
          {"scores", args.scores_path.empty() ? json(nullptr)
                                              : json(args.scores_path)}}},
        {"picks", picks}};
    write_text_file(args.out_path + ".provenance.json", provenance.dump(2) + "\n");

    std::cout << "selected " << anchors.size() << " of " << frames
              << " frames -> " << args.out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// propagate

struct PropagateArgs {
    std::string manifest_path;
    std::string anchors_path;
    std::size_t top_k = 5;
    double temperature = 0.1;
    std::size_t context = 3;
    std::optional<std::size_t> radius;
    std::string out_dir;
};

int run_propagate(const PropagateArgs& args) {
    ofr::PropagationConfig config;
    config.top_k = args.top_k;
    config.similarity_temperature = args.temperature;
    config.context_length = args.context;
    config.spatial_radius = args.radius;
    config.validate();

    const ofr::Manifest manifest = ofr::read_manifest(args.manifest_path);
    const std::vector<std::size_t> anchors =
        read_anchor_file(args.anchors_path, manifest.frame_count());

    std::string missing;
    for (std::size_t anchor : anchors) {
        if (!manifest.frames[anchor].mask_path)
            missing += (missing.empty() ? "" : ", ") + std::to_string(anchor);
    }
    if (!missing.empty())
        throw ofr::ParameterError("anchor frames without a mask in the manifest: " +
                                  missing);

    const ofr::SequencePlan plan =
        ofr::plan_batches(manifest.frame_count(), anchors);
    std::vector<ofr::LabelMask> anchor_masks;
    anchor_masks.reserve(plan.anchors.size());
    for (std::size_t anchor : plan.anchors) {
        ofr::LabelMask mask = ofr::read_mask_file(*manifest.frames[anchor].mask_path);
        mask.frame_id = anchor;
        anchor_masks.push_back(std::move(mask));
    }

    const std::vector<ofr::FeatureGrid> grids = load_features(manifest);
    const std::vector<ofr::LabelMask> output =
        ofr::propagate_sequence(grids, plan, anchor_masks, config);

    fs::create_directories(args.out_dir);
    for (std::size_t i = 0; i < output.size(); ++i)
        ofr::write_mask_file(output[i], fs::path(args.out_dir) / mask_file_name(i));

    json provenance = {
        {"tool", "ofrseg"},
        {"version", ofr::kVersion},
        {"command", "propagate"},
        {"config",
         {{"manifest", args.manifest_path},
          {"anchors", args.anchors_path},
          {"anchor_count", plan.anchors.size()},
          {"top_k", config.top_k},
          {"temperature", config.similarity_temperature},
          {"context", config.context_length},
          {"radius", args.radius ? json(*args.radius) : json(nullptr)}}}};
    write_text_file(fs::path(args.out_dir) / "provenance.json",
                    provenance.dump(2) + "\n");

    std::cout << "wrote " << output.size() << " masks to " << args.out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
    std::string pred_dir;
    std::string gt_manifest;
    std::string format = "text";
    std::string out_path;
};

std::string render_text_report(const ofr::IoUReport& report,
                               const ofr::ImbalanceReport& imbalance) {
    std::string header = "class";
    std::string row = "iou  ";
    for (const ofr::ClassIoU& entry : report.per_class) {
        header += " | " + entry.name;
        std::string cell =
            entry.iou ? std::to_string(ofr::percent(*entry.iou)) + "%" : "-";
        // pad to the class-name width for alignment
        if (cell.size() < entry.name.size())
            cell = std::string(entry.name.size() - cell.size(), ' ') + cell;
        row += " | " + cell;
    }

    std::string text = header + "\n" + row + "\n";
    if (report.miou)
        text += "miou: " + std::to_string(ofr::percent(*report.miou)) + "%\n";
    else
        text += "miou: - (no class present)\n";

    text += "absent:";
    if (report.absent_classes.empty())
        text += " -";
    for (const std::string& name : report.absent_classes)
        text += " " + name;
    text += "\n";

    text += "flagged:";
    if (imbalance.flagged_classes.empty())
        text += " -";
    for (const std::string& name : imbalance.flagged_classes)
        text += " " + name;
    text += "\n";
    return text;
}

int run_evaluate(const EvaluateArgs& args) {
    const ofr::Manifest manifest = ofr::read_manifest(args.gt_manifest);

    ofr::ConfusionMatrix cm(manifest.palette);
    std::size_t evaluated = 0;
    for (std::size_t i = 0; i < manifest.frame_count(); ++i) {
        if (!manifest.frames[i].mask_path)
            continue;
        const fs::path pred_path = fs::path(args.pred_dir) / mask_file_name(i);
        if (!fs::exists(pred_path))
            throw ofr::IoError("no prediction for frame " + std::to_string(i) +
                               ": " + pred_path.string());
        const ofr::LabelMask pred = ofr::read_mask_file(pred_path);
        const ofr::LabelMask gt = ofr::read_mask_file(*manifest.frames[i].mask_path);
        cm.accumulate(pred, gt);
        ++evaluated;
    }
    if (evaluated == 0)
        throw ofr::ParameterError("manifest has no ground-truth masks to evaluate");

    const ofr::IoUReport report = ofr::iou_per_class(cm);
    const ofr::ImbalanceReport imbalance = ofr::imbalance_report(cm);

    std::string rendered;
    if (args.format == "json") {
        json per_class = json::array();
        for (std::size_t c = 0; c < report.per_class.size(); ++c) {
            const ofr::ClassIoU& entry = report.per_class[c];
            per_class.push_back(
                {{"id", int(entry.id)},
                 {"name", entry.name},
                 {"iou", entry.iou ? json(*entry.iou) : json(nullptr)},
                 {"percent",
                  entry.iou ? json(ofr::percent(*entry.iou)) : json(nullptr)},
                 {"gt_share", imbalance.frequencies[c]}});
        }
        json doc = {
            {"provenance",
             {{"tool", "ofrseg"},
              {"version", ofr::kVersion},
              {"command", "evaluate"},
              {"config",
               {{"pred_dir", args.pred_dir}, {"gt_manifest", args.gt_manifest}}}}},
            {"frames_evaluated", evaluated},
            {"per_class", per_class},
            {"miou", report.miou ? json(*report.miou) : json(nullptr)},
            {"miou_percent",
             report.miou ? json(ofr::percent(*report.miou)) : json(nullptr)},
            {"absent_classes", report.absent_classes},
            {"flagged_classes", imbalance.flagged_classes}};
        rendered = doc.dump(2) + "\n";
    } else {
        rendered = "# ofrseg " + std::string(ofr::kVersion) + " evaluate, " +
                   std::to_string(evaluated) + " frames\n" +
                   render_text_report(report, imbalance);
    }

    std::cout << rendered;
    if (!args.out_path.empty())
        write_text_file(args.out_path, rendered);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Anchor selection, label propagation and IoU evaluation "
                 "over patch-feature sequences"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("ofrseg ") + ofr::kVersion);

    GenFixturesArgs gen;
    CLI::App* gen_cmd =
        app.add_subcommand("gen-fixtures", "Generate a deterministic synthetic sequence");
    gen_cmd->add_option("--frames", gen.frames, "number of frames")->required();
    gen_cmd->add_option("--patch-rows", gen.patch_rows, "patch grid rows");
    gen_cmd->add_option("--patch-cols", gen.patch_cols, "patch grid cols");
    gen_cmd->add_option("--dim", gen.dim, "feature dimension");
    gen_cmd->add_option("--classes", gen.classes, "class count");
    gen_cmd->add_option("--motion", gen.motion, "motion rule")
        ->check(CLI::IsMember({"static", "translate"}));
    gen_cmd->add_option("--noise", gen.noise, "feature noise level");
    gen_cmd->add_option("--pixels-per-patch", gen.pixels_per_patch,
                        "mask pixels per patch cell");
    gen_cmd->add_option("--seed", gen.seed, "RNG seed");
    gen_cmd->add_option("--out-dir", gen.out_dir, "output directory")->required();

    SelectArgs sel;
    CLI::App* sel_cmd = app.add_subcommand("select", "Select anchor frames");
    sel_cmd->add_option("--manifest", sel.manifest_path, "sequence manifest")
        ->required();
    sel_cmd->add_option("--count", sel.count, "frames to select");
    sel_cmd->add_option("--lambda-e", sel.lambda_e, "uncertainty weight");
    sel_cmd->add_option("--sign", sel.sign, "uncertainty sign")
        ->check(CLI::IsMember({"promote", "penalize"}));
    sel_cmd->add_option("--steps", sel.steps, "selection rounds");
    sel_cmd->add_option("--scores", sel.scores_path, "uncertainty scores file");
    sel_cmd->add_option("--seed-rule", sel.seed_rule, "seed frame rule")
        ->check(CLI::IsMember({"first-frame", "given-index", "max-norm"}));
    sel_cmd->add_option("--seed-index", sel.seed_index, "seed frame for given-index");
    sel_cmd->add_flag("--normalize", sel.normalize, "L2-normalize frame summaries");
    sel_cmd->add_option("--out", sel.out_path, "anchor list output file")->required();

    PropagateArgs prop;
    CLI::App* prop_cmd =
        app.add_subcommand("propagate", "Propagate anchor masks over the sequence");
    prop_cmd->add_option("--manifest", prop.manifest_path, "sequence manifest")
        ->required();
    prop_cmd->add_option("--anchors", prop.anchors_path, "anchor list file")
        ->required();
    prop_cmd->add_option("--top-k", prop.top_k, "neighbors per patch");
    prop_cmd->add_option("--temperature", prop.temperature, "similarity temperature");
    prop_cmd->add_option("--context", prop.context, "propagated context frames");
    prop_cmd->add_option("--radius", prop.radius, "patch search radius");
    prop_cmd->add_option("--out-dir", prop.out_dir, "mask output directory")
        ->required();

    EvaluateArgs eval;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "Score predictions against "
                                                        "ground truth");
    eval_cmd->add_option("--pred-dir", eval.pred_dir, "predicted mask directory")
        ->required();
    eval_cmd->add_option("--gt-manifest", eval.gt_manifest, "ground truth manifest")
        ->required();
    eval_cmd->add_option("--format", eval.format, "report format")
        ->check(CLI::IsMember({"text", "json"}));
    eval_cmd->add_option("--out", eval.out_path, "also write the report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "ofrseg: " << e.what() << "\n";
        return 1;
    }

    try {
        // Manifest config defaults apply only where the flag was not given.
        if (prop_cmd->parsed()) {
            const ofr::Manifest manifest = ofr::read_manifest(prop.manifest_path);
            if (!prop_cmd->count("--top-k") && manifest.config.top_k)
                prop.top_k = *manifest.config.top_k;
            if (!prop_cmd->count("--temperature") && manifest.config.temperature)
                prop.temperature = *manifest.config.temperature;
            if (!prop_cmd->count("--context") && manifest.config.context_length)
                prop.context = *manifest.config.context_length;
            return run_propagate(prop);
        }
        if (gen_cmd->parsed())
            return run_gen_fixtures(gen);
        if (sel_cmd->parsed())
            return run_select(sel);
        if (eval_cmd->parsed())
            return run_evaluate(eval);
        std::cerr << "ofrseg: no subcommand\n";
        return 1;
    } catch (const ofr::FormatError& e) {
        std::cerr << "ofrseg: " << e.what() << "\n";
        return 2;
    } catch (const ofr::CorruptionError& e) {
        std::cerr << "ofrseg: " << e.what() << "\n";
        return 2;
    } catch (const ofr::IoError& e) {
        std::cerr << "ofrseg: " << e.what() << "\n";
        return 2;
    } catch (const ofr::Error& e) {
        std::cerr << "ofrseg: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "ofrseg: " << e.what() << "\n";
        return 1;
    }
}

#include "ofrseg/fixture.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "ofrseg/errors.hpp"
#include "ofrseg/formats.hpp"
#include "ofrseg/propagation.hpp"

namespace ofr {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Gaussian draws via Box-Muller on mt19937_64 uniforms. mt19937_64 is
// pinned by the standard, so the stream is identical on every platform
// (std::normal_distribution is not).
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * kPi * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    double uniform() {
        // 53-bit mantissa in [0, 1)
        return double(rng_() >> 11) * (1.0 / 9007199254740992.0);
    }

    std::mt19937_64 rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace

void FixtureSpec::validate() const {
    if (frames < 1)
        throw ParameterError("fixture needs at least one frame");
    if (patch_rows < 1 || patch_cols < 1 || dim < 1 || pixels_per_patch < 1)
        throw ParameterError("fixture dimensions must all be >= 1");
    if (classes < 1 || classes > 256)
        throw ParameterError("fixture class count must be in [1, 256]");
    if (classes > patch_rows * patch_cols)
        throw ParameterError("fixture has more classes than patches");
    if (classes > 1 && dim < 2)
        throw ParameterError("multi-class fixtures need dim >= 2");
    if (!(noise >= 0.0) || !std::isfinite(noise))
        throw ParameterError("fixture noise must be finite and >= 0");
}

FixtureData generate_fixture_data(const FixtureSpec& spec, std::uint64_t seed) {
    spec.validate();

    const std::size_t patches = spec.patch_rows * spec.patch_cols;
    const double angle_gap = kPi / double(spec.classes);

    // Cluster magnitude keeping adjacent class means at least 6 noise
    // standard deviations apart (deviation measured as noise*sqrt(dim)).
    double magnitude = 1.0;
    if (spec.classes > 1) {
        const double adjacent_chord = 2.0 * std::sin(angle_gap / 2.0);
        magnitude = std::max(1.0, 6.0 * spec.noise * std::sqrt(double(spec.dim)) /
                                      adjacent_chord);
    }

    // Per-frame rotation of the cluster directions; capped so the total
    // sweep never wraps and a quarter of the class gap is never crossed
    // within a few frames of an anchor.
    double rotation_rate = 0.0;
    if (spec.motion == MotionRule::Translate && spec.frames > 1)
        rotation_rate = std::min(angle_gap / 24.0, kPi / double(spec.frames - 1));

    FixtureData data;
    for (std::size_t k = 0; k < spec.classes; ++k)
        data.palette.push_back(
            {std::uint8_t(k), "class_" + std::to_string(k)});

    GaussianSource gauss(seed);
    const std::size_t mask_rows = spec.patch_rows * spec.pixels_per_patch;
    const std::size_t mask_cols = spec.patch_cols * spec.pixels_per_patch;

    for (std::size_t t = 0; t < spec.frames; ++t) {
        std::vector<std::uint8_t> labels(patches);
        const std::size_t shift =
            spec.motion == MotionRule::Translate ? t % patches : 0;
        for (std::size_t p = 0; p < patches; ++p) {
            const std::size_t base = (p + patches - shift) % patches;
            labels[p] = std::uint8_t(base * spec.classes / patches);
        }

        FeatureGrid grid;
        grid.frame_id = t;
        grid.patch_rows = spec.patch_rows;
        grid.patch_cols = spec.patch_cols;
        grid.dim = spec.dim;
        grid.data.resize(patches * spec.dim);
        for (std::size_t p = 0; p < patches; ++p) {
            const double theta =
                angle_gap * double(labels[p]) + rotation_rate * double(t);
            float* cell = grid.data.data() + p * spec.dim;
            for (std::size_t d = 0; d < spec.dim; ++d) {
                double value = spec.noise * gauss.next();
                if (d == 0)
                    value += magnitude * std::cos(theta);
                else if (d == 1 && spec.dim >= 2)
                    value += magnitude * std::sin(theta);
                cell[d] = float(value);
            }
        }

        data.features.push_back(std::move(grid));
        data.masks.push_back(upsample_labels(labels, spec.patch_rows,
                                             spec.patch_cols, mask_rows, mask_cols,
                                             data.palette, t));
        data.patch_labels.push_back(std::move(labels));
    }
    return data;
}

std::filesystem::path generate_fixture(const FixtureSpec& spec, std::uint64_t seed,
                                       const std::filesystem::path& out_dir) {
    const FixtureData data = generate_fixture_data(spec, seed);

    std::error_code ec;
    std::filesystem::create_directories(out_dir / "features", ec);
    std::filesystem::create_directories(out_dir / "masks", ec);
    if (ec)
        throw IoError("cannot create fixture directories under " + out_dir.string());

    nlohmann::json doc;
    doc["sequence"] = "fixture_" +
                      std::string(spec.motion == MotionRule::Translate ? "translate"
                                                                       : "static") +
                      "_" + std::to_string(spec.frames);
    for (const ClassDef& def : data.palette)
        doc["palette"].push_back({{"id", int(def.id)}, {"name", def.name}});

    char name[64];
    for (std::size_t t = 0; t < spec.frames; ++t) {
        std::snprintf(name, sizeof(name), "features/frame_%06zu.ofrd", t);
        const std::string feature_rel = name;
        std::snprintf(name, sizeof(name), "masks/frame_%06zu.ofrm", t);
        const std::string mask_rel = name;

        write_feature_file(data.features[t], out_dir / feature_rel);
        write_mask_file(data.masks[t], out_dir / mask_rel);
        doc["frames"].push_back({{"feature", feature_rel}, {"mask", mask_rel}});
    }

    const std::filesystem::path manifest_path = out_dir / "manifest.json";
    const std::filesystem::path tmp = manifest_path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot create " + tmp.string());
        out << doc.dump(2) << "\n";
        if (!out)
            throw IoError("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, manifest_path, ec);
    if (ec)
        throw IoError("cannot move " + tmp.string() + ": " + ec.message());
    return manifest_path;
}

} // namespace ofr

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "helpers.hpp"
#include "nsl/dataset.hpp"

using namespace nsl;
using nsl::test::TempDir;
using nsl::test::write_file;

TEST_SUITE_BEGIN("dataset");

namespace {

const char* kManifest =
    "patient_id,slide_id,spot_id,x,y,patch_path\n"
    "P1,S1,spot_a,10,20,\n"
    "P2,S2,spot_b,30,40,\n";

const char* kExpression =
    "spot_id,GENE_B,GENE_A\n"
    "spot_a,1.5,0.25\n"
    "spot_b,2.5,0.75\n"
    "spot_c,9.0,9.0\n";

}  // namespace

TEST_CASE("manifest with two rows parses into two spots and two patients") {
    TempDir dir("manifest");
    write_file(dir.file("manifest.csv"), kManifest);
    const SpotDataset dataset = load_manifest(dir.file("manifest.csv"));
    REQUIRE(dataset.spots.size() == 2);
    CHECK(dataset.patients == std::vector<std::string>{"P1", "P2"});
    CHECK(dataset.spots[0].spot_id == "spot_a");
    CHECK(dataset.spots[0].x == 10);
    CHECK(dataset.spots[0].y == 20);
    CHECK(dataset.spots[1].slide_id == "S2");
    CHECK(dataset.spots[0].expression.empty());
}

TEST_CASE("manifest accepts permuted columns") {
    TempDir dir("manifest_perm");
    write_file(dir.file("m.csv"),
               "x,y,spot_id,patient_id,slide_id,patch_path\n"
               "5,6,s1,P9,S9,\n");
    const SpotDataset dataset = load_manifest(dir.file("m.csv"));
    REQUIRE(dataset.spots.size() == 1);
    CHECK(dataset.spots[0].patient_id == "P9");
    CHECK(dataset.spots[0].x == 5);
}

TEST_CASE("manifest resolves relative patch paths against its own directory") {
    TempDir dir("manifest_rel");
    write_file(dir.file("m.csv"),
               "patient_id,slide_id,spot_id,x,y,patch_path\n"
               "P1,S1,s1,0,0,patches/s1.png\n");
    const SpotDataset dataset = load_manifest(dir.file("m.csv"));
    CHECK(dataset.spots[0].patch_path == (dir.path() / "patches/s1.png").string());
}

TEST_CASE("manifest error paths") {
    TempDir dir("manifest_err");

    write_file(dir.file("dup.csv"),
               "patient_id,slide_id,spot_id,x,y,patch_path\n"
               "P1,S1,same,1,1,\n"
               "P2,S2,same,2,2,\n");
    CHECK_THROWS_AS(load_manifest(dir.file("dup.csv")), DuplicateSpotId);

    write_file(dir.file("missing.csv"),
               "slide_id,spot_id,x,y,patch_path\n"
               "S1,s1,1,1,\n");
    CHECK_THROWS_AS(load_manifest(dir.file("missing.csv")), MissingColumn);

    write_file(dir.file("short.csv"),
               "patient_id,slide_id,spot_id,x,y,patch_path\n"
               "P1,S1,s1,1\n");
    CHECK_THROWS_AS(load_manifest(dir.file("short.csv")), MalformedRow);

    write_file(dir.file("badnum.csv"),
               "patient_id,slide_id,spot_id,x,y,patch_path\n"
               "P1,S1,s1,abc,1,\n");
    CHECK_THROWS_AS(load_manifest(dir.file("badnum.csv")), MalformedRow);

    write_file(dir.file("negative.csv"),
               "patient_id,slide_id,spot_id,x,y,patch_path\n"
               "P1,S1,s1,-5,1,\n");
    CHECK_THROWS_AS(load_manifest(dir.file("negative.csv")), MalformedRow);
}

TEST_CASE("expression attaches vectors in gene-column order") {
    TempDir dir("expr");
    write_file(dir.file("m.csv"), kManifest);
    write_file(dir.file("e.csv"), kExpression);

    const SpotDataset manifest = load_manifest(dir.file("m.csv"));
    size_t dropped = 123;
    const SpotDataset dataset = load_expression(dir.file("e.csv"), manifest, &dropped);

    CHECK(dropped == 0);
    CHECK(dataset.gene_names == std::vector<std::string>{"GENE_B", "GENE_A"});
    REQUIRE(dataset.spots.size() == 2);
    CHECK(dataset.spots[0].expression == std::vector<double>{1.5, 0.25});
    CHECK(dataset.spots[1].expression == std::vector<double>{2.5, 0.75});
    CHECK(dataset.gene_index("GENE_A") == 1);
    CHECK(dataset.gene_index("NOPE") == -1);
}

TEST_CASE("expression supports tabs and reports dropped spots") {
    TempDir dir("expr_tab");
    write_file(dir.file("m.csv"), kManifest);
    write_file(dir.file("e.tsv"),
               "spot_id\tG1\n"
               "spot_a\t3.5\n");
    size_t dropped = 0;
    const SpotDataset dataset = load_expression(dir.file("e.tsv"), load_manifest(dir.file("m.csv")),
                                                &dropped);
    CHECK(dropped == 1);
    REQUIRE(dataset.spots.size() == 1);
    CHECK(dataset.spots[0].expression == std::vector<double>{3.5});
    CHECK(dataset.patients == std::vector<std::string>{"P1"});
}

TEST_CASE("expression error paths") {
    TempDir dir("expr_err");
    write_file(dir.file("m.csv"), kManifest);
    const SpotDataset manifest = load_manifest(dir.file("m.csv"));

    write_file(dir.file("none.csv"),
               "spot_id,G1\n"
               "other,1.0\n");
    CHECK_THROWS_AS(load_expression(dir.file("none.csv"), manifest), NoOverlap);

    write_file(dir.file("ragged.csv"),
               "spot_id,G1,G2\n"
               "spot_a,1.0\n");
    CHECK_THROWS_AS(load_expression(dir.file("ragged.csv"), manifest), RaggedRow);

    write_file(dir.file("noid.csv"),
               "id,G1\n"
               "spot_a,1.0\n");
    CHECK_THROWS_AS(load_expression(dir.file("noid.csv"), manifest), MissingColumn);
}

TEST_CASE("loading identical files twice yields identical datasets") {
    TempDir dir("expr_repeat");
    write_file(dir.file("m.csv"), kManifest);
    write_file(dir.file("e.csv"), kExpression);
    const SpotDataset manifest = load_manifest(dir.file("m.csv"));
    const SpotDataset a = load_expression(dir.file("e.csv"), manifest);
    const SpotDataset b = load_expression(dir.file("e.csv"), manifest);
    REQUIRE(a.spots.size() == b.spots.size());
    CHECK(a.gene_names == b.gene_names);
    for (size_t i = 0; i < a.spots.size(); ++i) {
        CHECK(a.spots[i].spot_id == b.spots[i].spot_id);
        CHECK(a.spots[i].expression == b.spots[i].expression);
    }
}

namespace {

SpotDataset medians_fixture() {
    // Medians: g1 -> 1, g2 -> 5, g3 -> 2
    SpotDataset dataset;
    dataset.gene_names = {"g1", "g2", "g3"};
    dataset.patients = {"P1"};
    const double values[3][3] = {{0, 4, 1}, {1, 5, 2}, {9, 6, 3}};
    for (int i = 0; i < 3; ++i) {
        SpotRecord spot;
        spot.patient_id = "P1";
        spot.spot_id = "s" + std::to_string(i);
        spot.expression = {values[i][0], values[i][1], values[i][2]};
        dataset.spots.push_back(spot);
    }
    return dataset;
}

}  // namespace

TEST_CASE("select_top_genes ranks by median, descending") {
    const SpotDataset dataset = medians_fixture();
    CHECK(select_top_genes(dataset, 2) == std::vector<std::string>{"g2", "g3"});
    CHECK(select_top_genes(dataset, 3) == std::vector<std::string>{"g2", "g3", "g1"});
    CHECK(select_top_genes(dataset, 50) == std::vector<std::string>{"g2", "g3", "g1"});
    CHECK_THROWS_AS(select_top_genes(dataset, 0), OutOfRange);
}

TEST_CASE("select_top_genes breaks ties by ascending name") {
    SpotDataset dataset;
    dataset.gene_names = {"zeta", "alpha", "mid"};
    dataset.patients = {"P1"};
    for (int i = 0; i < 3; ++i) {
        SpotRecord spot;
        spot.patient_id = "P1";
        spot.spot_id = "s" + std::to_string(i);
        spot.expression = {2.0, 2.0, 1.0};  // zeta and alpha tie
        dataset.spots.push_back(spot);
    }
    CHECK(select_top_genes(dataset, 2) == std::vector<std::string>{"alpha", "zeta"});
}

TEST_CASE("select_top_genes ranking is prefix-closed") {
    Rng rng(51);
    SpotDataset dataset;
    dataset.patients = {"P1"};
    for (int g = 0; g < 12; ++g) dataset.gene_names.push_back("gene" + std::to_string(g));
    for (int i = 0; i < 9; ++i) {
        SpotRecord spot;
        spot.patient_id = "P1";
        spot.spot_id = "s" + std::to_string(i);
        for (int g = 0; g < 12; ++g) spot.expression.push_back(rng.uniform(0, 5));
        dataset.spots.push_back(spot);
    }
    auto previous = select_top_genes(dataset, 1);
    for (int n = 2; n <= 12; ++n) {
        const auto current = select_top_genes(dataset, n);
        REQUIRE(current.size() == static_cast<size_t>(n));
        for (size_t i = 0; i < previous.size(); ++i) CHECK(current[i] == previous[i]);
        previous = current;
    }
}

TEST_CASE("log_transform anchors and monotonicity") {
    CHECK(log_transform(0.0, 1.0) == 0.0);
    CHECK(log_transform(std::exp(1.0) - 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(log_transform(-0.1, 1.0), NegativeExpression);
    CHECK_THROWS_AS(log_transform(1.0, 0.0), OutOfRange);

    Rng rng(52);
    for (int trial = 0; trial < 100; ++trial) {
        const double pc = rng.uniform(0.1, 3.0);
        const double v1 = rng.uniform(0, 10);
        const double v2 = v1 + rng.uniform(1e-6, 5.0);
        CHECK(log_transform(v1, pc) < log_transform(v2, pc));
    }
}

namespace {

RasterImage checkerboard4x4() {
    // (x + y) even -> black, odd -> white
    RasterImage image;
    image.width = 4;
    image.height = 4;
    image.pixels.resize(16);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            const std::uint8_t v = (x + y) % 2 == 0 ? 0 : 255;
            image.pixels[y * 4 + x] = {v, v, v};
        }
    }
    return image;
}

RasterImage solid(int side, std::uint8_t value) {
    RasterImage image;
    image.width = side;
    image.height = side;
    image.pixels.assign(static_cast<size_t>(side) * side, {value, value, value});
    return image;
}

}  // namespace

TEST_CASE("extract_patch centered on the midpoint covers the whole image") {
    const RasterImage image = solid(256, 100);
    const Patch patch = extract_patch(image, 128, 128, 256);
    CHECK(patch.width == 256);
    CHECK(patch.height == 256);
    CHECK(patch.padded_fraction == 0.0);
    CHECK(patch.pixels.size() == 256u * 256u);
    for (size_t i = 0; i < patch.pixels.size(); i += 997) {
        CHECK(patch.pixels[i][0] == doctest::Approx(100.0 / 255.0).epsilon(1e-15));
    }
}

TEST_CASE("extract_patch at the origin pads three quadrants white") {
    const RasterImage image = solid(256, 0);
    const Patch patch = extract_patch(image, 0, 0, 256);
    CHECK(patch.padded_fraction == doctest::Approx(0.75).epsilon(1e-15));
    // Top-left pixel of the crop is outside; the center region is inside.
    CHECK(patch.pixels[0] == Vec3{1.0, 1.0, 1.0});
    CHECK(patch.pixels[128 * 256 + 128][0] == 0.0);
}

TEST_CASE("extract_patch pulls the expected checkerboard sub-block") {
    const RasterImage image = checkerboard4x4();
    const Patch patch = extract_patch(image, 2, 2, 2);
    CHECK(patch.padded_fraction == 0.0);
    // Crop origin is (1,1): pixels (1,1),(2,1),(1,2),(2,2) -> black,white,white,black
    CHECK(patch.pixels[0][0] == 0.0);
    CHECK(patch.pixels[1][0] == 1.0);
    CHECK(patch.pixels[2][0] == 1.0);
    CHECK(patch.pixels[3][0] == 0.0);
}

TEST_CASE("extract_patch always returns side^2 pixels, even fully outside") {
    const RasterImage image = solid(8, 50);
    const Patch patch = extract_patch(image, 1000, 1000, 5);
    CHECK(patch.pixels.size() == 25);
    CHECK(patch.padded_fraction == 1.0);
    for (const Vec3& p : patch.pixels) CHECK(p == Vec3{1.0, 1.0, 1.0});
    CHECK_THROWS_AS(extract_patch(image, 0, 0, 0), OutOfRange);
}

TEST_CASE("png round trip preserves 8-bit pixels") {
    TempDir dir("png");
    Rng rng(53);
    RasterImage image;
    image.width = 9;
    image.height = 7;
    image.pixels.resize(63);
    for (auto& p : image.pixels) {
        p = {static_cast<std::uint8_t>(rng.uniform_index(256)),
             static_cast<std::uint8_t>(rng.uniform_index(256)),
             static_cast<std::uint8_t>(rng.uniform_index(256))};
    }
    write_png(dir.file("t.png"), image);
    const RasterImage back = read_png(dir.file("t.png"));
    REQUIRE(back.width == 9);
    REQUIRE(back.height == 7);
    CHECK(back.pixels == image.pixels);

    CHECK_THROWS_AS(read_png(dir.file("missing.png")), DecodeError);
}

TEST_CASE("synth_generate reproduces targets exactly at zero noise") {
    SynthConfig config = make_synth_config(2, 2, 5, 8, 0.0, 99);
    const SpotDataset dataset = synth_generate(config);
    REQUIRE(dataset.spots.size() == 10);
    for (const SpotRecord& spot : dataset.spots) {
        REQUIRE(spot.patch != nullptr);
        for (size_t g = 0; g < 2; ++g) {
            const double y = forward(*spot.patch, config.true_params[g], config.eps);
            CHECK(std::fabs(y - spot.expression[g]) < 1e-10);
        }
    }
}

TEST_CASE("synth_generate partitions spots evenly across patients") {
    const SynthConfig config = make_synth_config(1, 6, 200, 4, 0.05, 1);
    const SpotDataset dataset = synth_generate(config);
    CHECK(dataset.spots.size() == 1200);
    CHECK(dataset.patients.size() == 6);
    std::map<std::string, int> counts;
    std::set<std::string> spot_ids;
    for (const SpotRecord& spot : dataset.spots) {
        ++counts[spot.patient_id];
        spot_ids.insert(spot.spot_id);
        CHECK(spot.x >= 0);
        CHECK(spot.y >= 0);
    }
    CHECK(spot_ids.size() == 1200);
    for (const auto& [patient, count] : counts) CHECK(count == 200);
}

TEST_CASE("synth_generate is deterministic under the seed") {
    const SynthConfig config = make_synth_config(2, 2, 4, 6, 0.1, 2024);
    const SpotDataset a = synth_generate(config);
    const SpotDataset b = synth_generate(config);
    REQUIRE(a.spots.size() == b.spots.size());
    for (size_t i = 0; i < a.spots.size(); ++i) {
        CHECK(a.spots[i].expression == b.spots[i].expression);
        CHECK(a.spots[i].patch->pixels == b.spots[i].patch->pixels);
    }
}

TEST_CASE("synthetic patches hold a small color palette") {
    const SynthConfig config = make_synth_config(1, 1, 3, 16, 0.0, 5);
    const SpotDataset dataset = synth_generate(config);
    for (const SpotRecord& spot : dataset.spots) {
        const ColorHistogram hist = ColorHistogram::from_patch(*spot.patch);
        CHECK(hist.colors.size() <= 32);
        CHECK(hist.total == 256);
    }
}

TEST_CASE("patch source prefers memory, then file, then slide crop") {
    TempDir dir("source");
    const RasterImage image = solid(6, 200);
    write_png(dir.file("patch.png"), image);
    write_png(dir.file("slide.png"), solid(32, 10));

    SpotRecord with_file;
    with_file.spot_id = "f";
    with_file.patch_path = dir.file("patch.png");
    SpotRecord with_slide;
    with_slide.spot_id = "s";
    with_slide.slide_id = "S1";
    with_slide.x = 16;
    with_slide.y = 16;
    SpotRecord unmapped;
    unmapped.spot_id = "u";
    unmapped.slide_id = "S2";

    const PatchSource source({{"S1", dir.file("slide.png")}}, 8);
    const Patch from_file = source.load(with_file);
    CHECK(from_file.width == 6);
    CHECK(from_file.pixels[0][0] == doctest::Approx(200.0 / 255.0));
    const Patch from_slide = source.load(with_slide);
    CHECK(from_slide.width == 8);
    CHECK(from_slide.pixels[0][0] == doctest::Approx(10.0 / 255.0));
    CHECK_THROWS_AS(source.load(unmapped), DecodeError);
}

TEST_SUITE_END();

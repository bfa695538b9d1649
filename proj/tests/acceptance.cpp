// One test per acceptance criterion; the listener prints a PASS/FAIL line for each.
#include <chrono>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "support.hpp"
#include "xspec/cli.hpp"

using namespace xspec;
using support::TempDir;
namespace fs = std::filesystem;

namespace {

const fs::path kData = fs::path(XSPEC_SOURCE_DIR) / "data";

// tolerances
constexpr double kMapTolerance = 0.0005 + 1e-12;  // inclusive: several published means sit on a midpoint
constexpr double kRecoveryTolerance = 1e-6;
constexpr double kApTolerance = 1e-12;
constexpr double kNoisyRmseLow = 0.2, kNoisyRmseHigh = 1.5;

// runtime budgets, seconds
constexpr double kBudgetFast = 1.0, kBudgetFive = 5.0, kBudgetTen = 10.0;

class Stopwatch {
  public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct PublishedRow {
    const char* train;
    const char* test;
    ClassAps aps;
    double map;
};

ClassAps aps(std::optional<double> bicycle, std::optional<double> car, std::optional<double> dog,
             std::optional<double> person) {
    return {{"Bicycle", bicycle}, {"Car", car}, {"Dog", dog}, {"Person", person}};
}

// baseline table, then the night-time FLIR_RGB table
const std::vector<PublishedRow> kPublished = {
    {"IDD", "FLR_RGB", aps(0.192, 0.473, 0.052, 0.339), 0.264},
    {"IDD", "FLR_THM", aps(0.126, 0.265, 0.099, 0.160), 0.163},
    {"IDD", "IDD", aps(0.569, 0.617, 0.070, 0.448), 0.426},
    {"KITTI", "FLR_RGB", aps({}, 0, {}, 0.316), 0.158},
    {"KITTI", "FLR_THM", aps({}, 0, {}, 0.141), 0.070},
    {"KITTI", "KITTI", aps({}, 0.970, {}, 0.899), 0.935},
    {"FLR_THM", "FLIR_RGB", aps(0.1312, 0.571, 0, 0.245), 0.237},
    {"IDD", "FLIR_RGB", aps(0.3314, 0.625, 0.042, 0.365), 0.341},
    {"IDD+FLIR_THM", "FLIR_RGB", aps(0.1319, 0.570, 0, 0.260), 0.240},
    {"KITTI", "FLIR_RGB", aps({}, 0, {}, 0.403), 0.201},
    {"KITTI", "FLR_THM", aps({}, 0, {}, 0.141), 0.070},
    {"KITTI", "KITTI", aps({}, 0.970, {}, 0.899), 0.935},
};

std::vector<Correspondence> synthesize(const Eigen::Matrix3d& h, std::mt19937_64& rng, int n, double sigma) {
    std::uniform_real_distribution<double> ux(0.0, 640.0), uy(0.0, 512.0);
    std::normal_distribution<double> noise(0.0, sigma > 0 ? sigma : 1.0);
    std::vector<Correspondence> out;
    for (int i = 0; i < n; ++i) {
        const double x = ux(rng), y = uy(rng);
        Eigen::Vector2d t = oracle::apply(h, x, y);
        if (sigma > 0) t += Eigen::Vector2d(noise(rng), noise(rng));
        out.push_back({{x, y}, {t.x(), t.y()}});
    }
    return out;
}

std::pair<Dataset, DetectionSet> random_eval_scene(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> grid(0, 6), extent(1, 4), gts(0, 4), count(0, 6), cls(1, 3), score(0, 4);
    std::bernoulli_distribution near(0.6);
    Dataset d;
    d.categories = {{1, "Bicycle", Json::object()}, {2, "Car", Json::object()}, {3, "Person", Json::object()}};
    DetectionSet s{{}, "rand"};
    RecordId ann = 1;
    for (RecordId im = 1; im <= 3; ++im) {
        d.images.push_back({im, "i" + std::to_string(im) + ".png", 64, 64, Json::object()});
        const int g = gts(rng);
        for (int k = 0; k < g; ++k) {
            d.annotations.push_back({ann++, im, cls(rng),
                                     BBox{8.0 * grid(rng), 8.0 * grid(rng), 8.0 * extent(rng), 8.0 * extent(rng)},
                                     Json::object()});
        }
        const int n = count(rng);
        for (int k = 0; k < n; ++k) {
            Detection det{im, cls(rng), BBox{8.0 * grid(rng), 8.0 * grid(rng), 8.0 * extent(rng), 8.0 * extent(rng)},
                          0.2 * score(rng) + 0.1};
            if (g > 0 && near(rng)) {
                const auto& a = d.annotations[d.annotations.size() - 1 - static_cast<std::size_t>(k % g)];
                det.category_id = a.category_id;
                det.bbox = BBox{a.bbox.x + 4.0 * (grid(rng) % 2), a.bbox.y, a.bbox.w, a.bbox.h};
            }
            s.detections.push_back(det);
        }
    }
    return {d, s};
}

struct TransferScene {
    Dataset source;
    std::vector<ImagePair> pairs;
    std::map<std::string, Homography> homographies;
};

TransferScene random_transfer_scene(std::uint64_t seed, bool identity) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> x(0.0, 620.0), y(0.0, 500.0), sz(2.0, 150.0);
    std::uniform_real_distribution<double> a(-0.2, 0.2), s(0.7, 1.3), t(-120.0, 120.0), p(-3e-4, 3e-4);
    TransferScene sc;
    sc.source.categories = {{1, "Person", Json::object()}, {3, "Car", Json::object()}};
    RecordId ann = 500;
    for (RecordId i = 1; i <= 4; ++i) {
        const std::string name = "thermal_" + std::to_string(i) + ".jpeg";
        sc.source.images.push_back({i, name, 640, 512, Json::object()});
        for (int k = 0; k < 10; ++k) {
            sc.source.annotations.push_back({ann--, i, k % 2 ? 1 : 3, BBox{x(rng), y(rng), sz(rng), sz(rng)}, Json::object()});
        }
        const std::string id = "p" + std::to_string(i);
        sc.pairs.push_back({id, name, "visible_" + std::to_string(i) + ".jpeg", 640, 512});
        Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
        if (!identity) {
            const double th = a(rng), k = s(rng);
            m << k * std::cos(th), -k * std::sin(th), t(rng), k * std::sin(th), k * std::cos(th), t(rng), p(rng), p(rng), 1.0;
        }
        sc.homographies.emplace(id, Homography::from_matrix(m));
    }
    return sc;
}

/// The bundled pipeline, in process, laid out like tools/run_pipeline.sh.
void run_pipeline(const fs::path& fx, const fs::path& out) {
    using namespace xspec::cli;
    std::ostringstream err;
    auto step = [&](const fs::path& stdout_file, auto&& fn) {
        std::ostringstream o;
        const int code = fn(o);
        ASSERT_EQ(code, 0) << err.str();
        if (!stdout_file.empty()) write_text_file(out / stdout_file, o.str());
    };
    fs::create_directories(out);
    step("register.txt", [&](auto& o) {
        return run_register({fx / "pairs.json", fx / "correspondences", out / "homographies", out / "register.json"}, o, err);
    });
    step("transfer.txt", [&](auto& o) {
        return run_transfer({fx / "annotations.json", fx / "pairs.json", out / "homographies", out / "visible.json", {},
                             fx / "correspondences"}, o, err);
    });
    step("remap.txt", [&](auto& o) { return run_remap({out / "visible.json", "idd_to_flir", true, out / "flir.json"}, o, err); });
    step("split.txt", [&](auto& o) { return run_split({out / "flir.json", fx / "manifest.csv", {}, {}}, o, err); });
    const std::vector<std::string> dets = {"FLIR_THM=" + (fx / "detections" / "thm.json").string(),
                                           "IDD+FLIR_THM=" + (fx / "detections" / "mix.json").string()};
    for (const auto& table : {std::pair{TableFormat::Markdown, "table.md"}, {TableFormat::Csv, "table.csv"}}) {
        step({}, [&](auto& o) {
            return run_eval({out / "flir.night.json", dets, 0.5, table.first, "FLIR_RGB", out / table.second}, o, err);
        });
    }
}

std::map<fs::path, std::string> tree(const fs::path& root) {
    std::map<fs::path, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), root)] = read_text_file(e.path());
    }
    return files;
}

}  // namespace

// ------------------------------------------------------------ criteria

TEST(Acceptance, MapAggregationAnchor) {
    Stopwatch sw;
    for (const auto& row : kPublished) {
        const double mean = aggregate_map(row.aps);
        EXPECT_LE(std::abs(mean - row.map), kMapTolerance) << row.train << " / " << row.test << ": " << mean;
    }
    EXPECT_NEAR(aggregate_map(kPublished[5].aps), 0.9345, 1e-12);
    EXPECT_EQ(format_ap(aggregate_map(kPublished[5].aps)), "0.935");
    EXPECT_NEAR(aggregate_map(kPublished[9].aps), 0.2015, 1e-12);
    EXPECT_LT(sw.seconds(), kBudgetFast);
}

TEST(Acceptance, HomographyRecovery) {
    Stopwatch sw;
    std::mt19937_64 rng(20190601);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const Eigen::Matrix3d truth = oracle::random_homography(rng);
        ASSERT_GT(std::abs(truth.determinant()), 1e-3);
        const auto fitted = fit_homography(synthesize(truth, rng, 8, 0.0));
        worst = std::max(worst, (fitted.matrix() - oracle::unit_scale(truth)).cwiseAbs().maxCoeff());
    }
    EXPECT_LE(worst, kRecoveryTolerance);

    std::vector<double> rmse;
    for (int trial = 0; trial < 500; ++trial) {
        const auto corrs = synthesize(oracle::random_homography(rng), rng, 20, 0.5);
        rmse.push_back(residuals(fit_homography(corrs), corrs).rmse);
    }
    std::nth_element(rmse.begin(), rmse.begin() + 250, rmse.end());
    const double median = rmse[250];
    EXPECT_GE(median, kNoisyRmseLow);
    EXPECT_LE(median, kNoisyRmseHigh);
    std::printf("  worst exact-fit deviation %.3g, noisy median rmse %.4f px\n", worst, median);
    EXPECT_LT(sw.seconds(), kBudgetFive);
}

TEST(Acceptance, ApOracleEquivalence) {
    Stopwatch sw;
    std::size_t sequences = 0;
    for (std::size_t len = 0; len <= 6; ++len) {
        for (std::uint32_t bits = 0; bits < (1u << len); ++bits) {
            std::vector<Outcome> seq;
            std::vector<bool> flags;
            std::size_t tps = 0;
            for (std::size_t k = 0; k < len; ++k) {
                const bool tp = bits >> k & 1u;
                tps += tp;
                flags.push_back(tp);
                seq.push_back(tp ? Outcome::TruePositive : Outcome::FalsePositive);
            }
            for (std::size_t gt = std::max<std::size_t>(tps, 1); gt <= 4; ++gt) {
                const double want = oracle::ap_exact(flags, static_cast<std::int64_t>(gt)).value();
                ASSERT_NEAR(average_precision(seq, gt), want, kApTolerance) << "len " << len << " bits " << bits;
                ++sequences;
            }
        }
    }
    EXPECT_GT(sequences, 200u);

    std::mt19937_64 rng(653);
    int scenes = 0;
    while (scenes < 100) {
        auto [gt, dets] = random_eval_scene(rng);
        const auto want = oracle::evaluate_ref(gt, dets, 0.5);
        if (std::none_of(want.begin(), want.end(), [](const auto& kv) { return kv.second.has_value(); })) continue;
        const auto got = evaluate(gt, dets, 0.5);
        ASSERT_EQ(got.per_class_ap.size(), want.size());
        for (const auto& [label, ap] : want) {
            ASSERT_EQ(got.per_class_ap.at(label).has_value(), ap.has_value()) << label;
            if (ap) {
                EXPECT_NEAR(*got.per_class_ap.at(label), *ap, kApTolerance) << label << " scene " << scenes;
            }
        }
        ++scenes;
    }
    EXPECT_LT(sw.seconds(), kBudgetTen);
}

TEST(Acceptance, MappingSuite) {
    Stopwatch sw;
    using Row = std::pair<std::string, std::optional<std::string>>;
    const std::vector<Row> idd = {{"Person", "Person"},     {"Rider", "Person"},     {"Car", "Car"},
                                  {"Caravan", "Car"},       {"Autorickshaw", "Car"}, {"Bicycle", "Bicycle"},
                                  {"Motorcycle", "Bicycle"}, {"Animal", "Dog"},      {"Bus", std::nullopt},
                                  {"Trailer", std::nullopt}, {"Truck", std::nullopt}, {"Vehicle fallback", std::nullopt}};
    const std::vector<Row> kitti = {{"Pedestrian", "Person"}, {"Cyclist", "Person"}, {"Car", "Car"}, {"Truck", std::nullopt}};
    auto check = [](const CategoryMap& m, const std::vector<Row>& want) {
        ASSERT_EQ(m.entries.size(), want.size()) << m.name;
        for (const auto& [src, dst] : want) {
            const MapEntry* e = m.find(src);
            ASSERT_NE(e, nullptr) << m.name << ": " << src;
            EXPECT_EQ(e->target, dst) << m.name << ": " << src;
        }
    };
    ASSERT_EQ(builtin_maps().size(), 2u);
    check(*find_builtin_map("idd_to_flir"), idd);
    check(*find_builtin_map("kitti_to_flir"), kitti);

    const Dataset src = parse_dataset(read_text_file(kData / "fixture" / "annotations.json"));
    const auto r = remap_labels(src, *find_builtin_map("idd_to_flir"));
    std::set<std::string> labels;
    for (const auto& a : r.dataset.annotations) labels.insert(r.dataset.find_category(a.category_id)->name);
    EXPECT_EQ(labels, (std::set<std::string>{"Bicycle", "Car", "Dog", "Person"}));
    EXPECT_EQ(r.report.kept + r.report.dropped, src.annotations.size());
    EXPECT_LT(sw.seconds(), kBudgetFast);
}

TEST(Acceptance, NightSplitAnchor) {
    Stopwatch sw;
    Dataset d;
    d.categories = {{1, "Car", Json::object()}};
    SplitManifest m;
    std::mt19937_64 rng(1247);
    std::vector<std::size_t> order(1247);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::set<std::size_t> night(order.begin(), order.begin() + 653);
    for (std::size_t i = 0; i < 1247; ++i) {
        const auto id = static_cast<RecordId>(i + 1);
        d.images.push_back({id, "video-" + std::to_string(i) + ".jpeg", 1800, 1600, Json::object()});
        d.annotations.push_back({id, id, 1, {1, 1, 20, 20}, Json::object()});
        d.annotations.push_back({id + 5000, id, 1, {40, 40, 10, 10}, Json::object()});
        m.entries.push_back({d.images.back().file_name, night.contains(i) ? Phase::Night : Phase::Day});
    }
    const auto parts = split_by_manifest(d, m);
    EXPECT_EQ(parts.night.images.size(), 653u);
    EXPECT_EQ(parts.day.images.size(), 594u);

    std::set<RecordId> seen;
    for (const Dataset* part : {&parts.night, &parts.day}) {
        EXPECT_EQ(part->categories, d.categories);
        std::set<RecordId> mine;
        for (const auto& im : part->images) {
            EXPECT_TRUE(seen.insert(im.id).second) << "image " << im.id << " in both halves";
            mine.insert(im.id);
        }
        for (const auto& a : part->annotations) EXPECT_TRUE(mine.contains(a.image_id));
    }
    EXPECT_EQ(seen.size(), d.images.size());
    EXPECT_EQ(parts.night.annotations.size() + parts.day.annotations.size(), d.annotations.size());
    EXPECT_LT(sw.seconds(), kBudgetFast);
}

TEST(Acceptance, EndToEndGoldenRun) {
    Stopwatch sw;
    TempDir dir;
    run_pipeline(kData / "fixture", dir.path());
    if (HasFatalFailure()) return;

    const auto want = tree(kData / "golden");
    const auto got = tree(dir.path());
    ASSERT_FALSE(want.empty());
    for (const auto& [rel, bytes] : want) {
        const auto it = got.find(rel);
        ASSERT_NE(it, got.end()) << "missing " << rel;
        EXPECT_TRUE(it->second == bytes) << rel << " differs from the golden copy";
    }
    EXPECT_EQ(got.size(), want.size());

    // table cells agree with the reference evaluator
    const Dataset night = parse_dataset(read_text_file(dir / "flir.night.json"));
    const Json table = Json::parse(read_text_file(dir / "table.json"));
    const fs::path fx = kData / "fixture" / "detections";
    std::size_t row = 0;
    for (const auto& [tag, file] : {std::pair{"FLIR_THM", "thm.json"}, {"IDD+FLIR_THM", "mix.json"}}) {
        const auto ref = oracle::evaluate_ref(night, parse_detections(read_text_file(fx / file), tag), 0.5);
        const Json& r = table.at(row++);
        EXPECT_EQ(r["train_tag"], tag);
        for (const auto& [label, ap] : ref) {
            ASSERT_TRUE(ap.has_value()) << label;
            EXPECT_NEAR(r["per_class_ap"][label].get<double>(), *ap, kApTolerance) << tag << " " << label;
        }
    }

    // column layout, absent classes as "-"
    EXPECT_EQ(read_text_file(dir / "table.csv").substr(0, read_text_file(dir / "table.csv").find('\n')),
              "Train Dataset, Test Dataset, Bicycle, Car, Dog, Person, mAP");
    const EvalReport kitti{"KITTI", "KITTI", 0.5, kPublished[5].aps, aggregate_map(kPublished[5].aps)};
    EXPECT_EQ(render_table({kitti}, TableFormat::Csv),
              "Train Dataset, Test Dataset, Bicycle, Car, Dog, Person, mAP\n"
              "KITTI, KITTI, -, 0.970, -, 0.899, 0.935\n");
    EXPECT_LT(sw.seconds(), kBudgetTen);
}

TEST(Acceptance, TransferProperties) {
    Stopwatch sw;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto s = random_transfer_scene(seed, true);
        const auto r = transfer_dataset(s.source, s.pairs, s.homographies, {false, 0.0, 0.0});
        ASSERT_EQ(r.dataset.annotations.size(), s.source.annotations.size());
        std::size_t k = 0;
        for (const auto& im : s.source.images) {
            std::vector<const AnnotationRecord*> mine;
            for (const auto& a : s.source.annotations) if (a.image_id == im.id) mine.push_back(&a);
            std::sort(mine.begin(), mine.end(), [](auto* a, auto* b) { return a->id < b->id; });
            for (const auto* a : mine) {
                const auto& t = r.dataset.annotations[k++];
                EXPECT_EQ(t.id, static_cast<RecordId>(k));
                EXPECT_EQ(t.category_id, a->category_id);
                EXPECT_NEAR(t.bbox.x, a->bbox.x, 1e-9);
                EXPECT_NEAR(t.bbox.y, a->bbox.y, 1e-9);
                EXPECT_NEAR(t.bbox.w, a->bbox.w, 1e-9);
                EXPECT_NEAR(t.bbox.h, a->bbox.h, 1e-9);
            }
        }
    }

    std::mt19937_64 rng(200);
    std::uniform_real_distribution<double> frac(0.0, 1.0), area(0.0, 400.0);
    std::bernoulli_distribution clip(0.5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = random_transfer_scene(static_cast<std::uint64_t>(100 + trial), false);
        const TransferPolicy policy{clip(rng), frac(rng), area(rng)};
        const auto r = transfer_dataset(s.source, s.pairs, s.homographies, policy);
        std::size_t kept = 0, dropped = 0;
        for (const auto& p : r.report.pairs) kept += p.kept(), dropped += p.dropped;
        EXPECT_EQ(kept + dropped, s.source.annotations.size()) << "trial " << trial;
        EXPECT_EQ(kept, r.dataset.annotations.size());
        if (!policy.clip_to_frame) continue;
        for (const auto& a : r.dataset.annotations) {
            const ImageRecord* im = r.dataset.find_image(a.image_id);
            EXPECT_GE(a.bbox.x, 0.0);
            EXPECT_GE(a.bbox.y, 0.0);
            EXPECT_LE(a.bbox.right(), static_cast<double>(im->width));
            EXPECT_LE(a.bbox.bottom(), static_cast<double>(im->height));
        }
    }
    EXPECT_LT(sw.seconds(), kBudgetFive);
}

// ------------------------------------------------------------ report

namespace {

class CriterionPrinter : public testing::EmptyTestEventListener {
  public:
    void OnTestEnd(const testing::TestInfo& t) override {
        const auto* r = t.result();
        const char* label = t.name();
        for (const auto& [name, text] : kLabels) {
            if (name == t.name()) label = text;
        }
        std::printf("%s  %s  (%lld ms)\n", r->Passed() ? "PASS" : "FAIL", label,
                    static_cast<long long>(r->elapsed_time()));
        std::fflush(stdout);
    }
    void OnTestProgramEnd(const testing::UnitTest& u) override {
        std::printf("%d of %d criteria passed\n", u.successful_test_count(), u.test_to_run_count());
    }

  private:
    static constexpr std::pair<std::string_view, const char*> kLabels[] = {
        {"MapAggregationAnchor", "mAP aggregation anchor"},
        {"HomographyRecovery", "homography recovery suite"},
        {"ApOracleEquivalence", "AP oracle equivalence"},
        {"MappingSuite", "label mapping suite"},
        {"NightSplitAnchor", "night split anchor"},
        {"EndToEndGoldenRun", "end-to-end golden run"},
        {"TransferProperties", "transfer properties"},
    };
};

}  // namespace

int main(int argc, char** argv) {
    testing::InitGoogleTest(&argc, argv);
    testing::UnitTest::GetInstance()->listeners().Append(new CriterionPrinter);
    return RUN_ALL_TESTS();
}

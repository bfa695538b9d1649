#pragma once

// The xspec subcommands as plain functions returning process exit codes:
// 0 success, 1 validation or input failure, 2 internal error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xspec/dataset.hpp"
#include "xspec/evaluation.hpp"
#include "xspec/geometry_io.hpp"
#include "xspec/label_map.hpp"
#include "xspec/split.hpp"
#include "xspec/transfer.hpp"

namespace xspec::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitInternal = 2;

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

/// path/to/name.json -> path/to/name<suffix>
inline fs::path sibling_with_suffix(const fs::path& file, const std::string& suffix) {
    return file.parent_path() / (file.stem().string() + suffix);
}

inline std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// ---------------------------------------------------------------- register

struct RegisterOptions {
    fs::path pairs_file;
    fs::path correspondences_dir;
    fs::path out_dir;
    std::optional<fs::path> summary_file;
};

inline int run_register(const RegisterOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto pairs = parse_pairs(read_text_file(o.pairs_file), o.pairs_file.string());
        fs::create_directories(o.out_dir);
        Json summary = Json::array();
        std::size_t failures = 0;
        for (const auto& p : pairs) {
            const fs::path file = o.correspondences_dir / (p.pair_id + ".json");
            try {
                const auto set = parse_correspondence_set(read_text_file(file), file.string());
                if (set.pair_id != p.pair_id) {
                    throw Error(ErrorCode::MalformedField,
                                "correspondence file names pair \"" + set.pair_id + "\"", file.string());
                }
                const Homography h = fit_homography(set.points);
                const FitDiagnostics d = residuals(h, set.points);
                write_text_file(o.out_dir / (p.pair_id + ".json"), write_homography_file(p.pair_id, h));
                out << p.pair_id << "  ok  points=" << set.points.size() << "  rmse=" << fixed(d.rmse)
                    << "  max_error=" << fixed(d.max_error) << "\n";
                Json j = to_json(d);
                j["pair_id"] = p.pair_id;
                j["status"] = "ok";
                j["points"] = set.points.size();
                summary.push_back(std::move(j));
            } catch (const Error& e) {
                ++failures;
                out << p.pair_id << "  FAILED  " << to_string(e.code()) << ": " << e.message() << "\n";
                summary.push_back(Json{{"pair_id", p.pair_id},
                                       {"status", "failed"},
                                       {"error", std::string(to_string(e.code()))},
                                       {"message", e.message()}});
            }
        }
        if (o.summary_file) write_text_file(*o.summary_file, dump_json(Json{{"pairs", summary}}));
        out << (pairs.size() - failures) << " of " << pairs.size() << " pairs registered\n";
        return failures == 0 ? kExitOk : kExitInput;
    });
}

// ---------------------------------------------------------------- transfer

struct TransferOptions {
    fs::path gt_file;
    fs::path pairs_file;
    fs::path homographies_dir;
    fs::path out_file;
    TransferPolicy policy;
    std::optional<fs::path> correspondences_dir;  // attaches fit diagnostics to the report
};

inline fs::path transfer_report_path(const fs::path& out_file) {
    return sibling_with_suffix(out_file, ".report.json");
}

inline int run_transfer(const TransferOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Dataset source = parse_dataset(read_text_file(o.gt_file), o.gt_file.string());
        const auto pairs = pair_catalog(source, read_text_file(o.pairs_file), o.pairs_file.string());

        std::map<std::string, Homography> homographies;
        std::map<std::string, FitDiagnostics> diagnostics;
        for (const auto& p : pairs) {
            const fs::path file = o.homographies_dir / (p.pair_id + ".json");
            if (!fs::exists(file)) {
                throw Error(ErrorCode::MissingHomography, "no homography file", file.string());
            }
            const auto rec = parse_homography_file(read_text_file(file), file.string());
            if (rec.pair_id != p.pair_id) {
                throw Error(ErrorCode::MalformedField, "homography file names pair \"" + rec.pair_id + "\"",
                            file.string());
            }
            homographies.emplace(p.pair_id, rec.homography);
            if (o.correspondences_dir) {
                const fs::path cf = *o.correspondences_dir / (p.pair_id + ".json");
                if (fs::exists(cf)) {
                    const auto set = parse_correspondence_set(read_text_file(cf), cf.string());
                    if (!set.points.empty()) diagnostics.emplace(p.pair_id, residuals(rec.homography, set.points));
                }
            }
        }

        const auto result = transfer_dataset(source, pairs, homographies, o.policy, diagnostics);
        write_text_file(o.out_file, write_dataset(result.dataset));
        write_text_file(transfer_report_path(o.out_file), dump_json(to_json(result.report)));
        const auto& r = result.report;
        out << "pairs=" << r.pairs.size() << "  projected=" << r.total(&PairTransferReport::projected)
            << "  clipped=" << r.total(&PairTransferReport::clipped)
            << "  unclipped=" << r.total(&PairTransferReport::unclipped)
            << "  dropped=" << r.total(&PairTransferReport::dropped) << "\n";
        return kExitOk;
    });
}

// ---------------------------------------------------------------- remap

struct RemapCliOptions {
    fs::path dataset_file;
    std::string map;  // builtin name or path to a map file
    bool strict = true;
    fs::path out_file;
};

inline fs::path remap_report_path(const fs::path& out_file) {
    return sibling_with_suffix(out_file, ".remap.json");
}

inline CategoryMap resolve_map(const std::string& spec) {
    if (auto m = find_builtin_map(spec)) return *m;
    if (fs::exists(spec)) return parse_category_map(read_text_file(spec), spec);
    std::string names;
    for (const auto& m : builtin_maps()) names += (names.empty() ? "" : ", ") + m.name;
    throw Error(ErrorCode::Io, "unknown map \"" + spec + "\" (builtin maps: " + names + ")");
}

inline int run_remap(const RemapCliOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Dataset d = parse_dataset(read_text_file(o.dataset_file), o.dataset_file.string());
        const CategoryMap m = resolve_map(o.map);
        const auto result = remap_labels(d, m, RemapOptions{o.strict});
        write_text_file(o.out_file, write_dataset(result.dataset));
        write_text_file(remap_report_path(o.out_file), dump_json(to_json(result.report)));
        out << "map=" << m.name << "  kept=" << result.report.kept << "  dropped=" << result.report.dropped
            << "\n";
        if (result.report.empty_result) err << "warning: every annotation was dropped\n";
        return kExitOk;
    });
}

// ---------------------------------------------------------------- split

struct SplitOptions {
    fs::path dataset_file;
    std::optional<fs::path> manifest_file;
    std::optional<std::string> night_substring;
    std::optional<fs::path> out_dir;  // defaults to the dataset's directory
};

inline int run_split(const SplitOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Dataset d = parse_dataset(read_text_file(o.dataset_file), o.dataset_file.string());
        SplitManifest manifest;
        if (o.manifest_file) {
            manifest = parse_split_manifest(read_text_file(*o.manifest_file), o.manifest_file->string());
        } else if (o.night_substring) {
            manifest = manifest_from_substring(d, *o.night_substring);
        } else {
            throw Error(ErrorCode::MissingField, "either a manifest or --night-substring is required");
        }
        const auto parts = split_by_manifest(d, manifest);
        const fs::path dir = o.out_dir ? *o.out_dir : o.dataset_file.parent_path();
        const std::string stem = o.dataset_file.stem().string();
        write_text_file(dir / (stem + ".night.json"), write_dataset(parts.night));
        write_text_file(dir / (stem + ".day.json"), write_dataset(parts.day));
        out << "night=" << parts.night.images.size() << "  day=" << parts.day.images.size() << "\n";
        return kExitOk;
    });
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
    fs::path gt_file;
    std::vector<std::string> detections;  // "TAG=path" or "path" (tag = file stem)
    double iou_threshold = kDefaultIouThreshold;
    TableFormat format = TableFormat::Markdown;
    std::optional<std::string> test_tag;  // defaults to the ground-truth file stem
    std::optional<fs::path> report_file;  // rendered table; JSON lands beside it
};

inline std::pair<std::string, fs::path> split_tagged_path(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq != std::string::npos && eq > 0 && spec.find('/') > eq) {
        return {spec.substr(0, eq), fs::path(spec.substr(eq + 1))};
    }
    return {fs::path(spec).stem().string(), fs::path(spec)};
}

inline fs::path eval_json_path(const fs::path& report_file) {
    if (report_file.extension() == ".json") return sibling_with_suffix(report_file, ".report.json");
    return sibling_with_suffix(report_file, ".json");
}

inline int run_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (o.detections.empty()) throw Error(ErrorCode::MissingField, "no detection files given");
        const Dataset gt = parse_dataset(read_text_file(o.gt_file), o.gt_file.string());
        const std::string test_tag = o.test_tag.value_or(o.gt_file.stem().string());
        std::vector<EvalReport> reports;
        bool failed = false;
        for (const auto& spec : o.detections) {
            const auto [tag, path] = split_tagged_path(spec);
            try {
                const DetectionSet dets = parse_detections(read_text_file(path), tag, path.string());
                reports.push_back(evaluate(gt, dets, o.iou_threshold, test_tag));
            } catch (const Error& e) {
                failed = true;
                err << "error: " << path.string() << ": " << e.what() << "\n";
            }
        }
        if (!reports.empty()) {
            const std::string table = render_table(reports, o.format);
            out << table;
            if (o.report_file) {
                write_text_file(*o.report_file, table);
                Json j = Json::array();
                for (const auto& r : reports) j.push_back(to_json(r));
                write_text_file(eval_json_path(*o.report_file), dump_json(j));
            }
        }
        return failed ? kExitInput : kExitOk;
    });
}

}  // namespace xspec::cli

// xspec: register | transfer | remap | split | eval | serve

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "xspec/cli.hpp"
#include "xspec/service.hpp"

namespace {

xspec::Service* g_service = nullptr;

void handle_signal(int) {
    if (g_service) g_service->stop();
}

int run_serve(const std::string& workspace, const std::string& host, int port,
              const std::string& ui_dir) {
    return xspec::cli::guarded(std::cerr, [&] {
        xspec::Workspace ws(workspace);
        xspec::Service service(ws, ui_dir);
        const int bound = service.bind(host, port);
        g_service = &service;
        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);
        std::cout << "serving " << workspace << " on http://" << host << ":" << bound << std::endl;
        service.run();
        g_service = nullptr;
        return xspec::cli::kExitOk;
    });
}

}  // namespace

int main(int argc, char** argv) {
    using namespace xspec::cli;

    CLI::App app{"Thermal-to-visible annotation transfer and detection evaluation"};
    app.require_subcommand(1);

    RegisterOptions reg;
    std::string reg_summary;
    auto* reg_cmd = app.add_subcommand("register", "fit one homography per pair from picked points");
    reg_cmd->add_option("pairs", reg.pairs_file, "pairing file")->required();
    reg_cmd->add_option("correspondences", reg.correspondences_dir, "directory of <pair_id>.json")->required();
    reg_cmd->add_option("out", reg.out_dir, "output directory for homography files")->required();
    reg_cmd->add_option("--summary", reg_summary, "write a JSON diagnostics summary");

    TransferOptions tr;
    bool no_clip = false;
    std::string tr_corr;
    auto* tr_cmd = app.add_subcommand("transfer", "project thermal annotations into the visible frame");
    tr_cmd->add_option("gt", tr.gt_file, "thermal annotation file")->required();
    tr_cmd->add_option("pairs", tr.pairs_file, "pairing file")->required();
    tr_cmd->add_option("homographies", tr.homographies_dir, "directory of <pair_id>.json")->required();
    tr_cmd->add_option("out", tr.out_file, "translated annotation file")->required();
    tr_cmd->add_flag("--no-clip", no_clip, "keep projected boxes unclipped");
    tr_cmd->add_option("--min-visible-fraction", tr.policy.min_visible_fraction, "drop threshold")
        ->check(CLI::Range(0.0, 1.0));
    tr_cmd->add_option("--min-pixel-area", tr.policy.min_pixel_area, "drop boxes smaller than this")
        ->check(CLI::NonNegativeNumber);
    tr_cmd->add_option("--correspondences", tr_corr, "attach fit residuals to the report");

    RemapCliOptions rm;
    bool drop_unmapped = false;
    auto* rm_cmd = app.add_subcommand("remap", "translate labels into another ontology");
    rm_cmd->add_option("dataset", rm.dataset_file, "annotation file")->required();
    rm_cmd->add_option("--map", rm.map, "builtin map name (idd_to_flir, kitti_to_flir) or map file")
        ->required();
    rm_cmd->add_option("-o,--out", rm.out_file, "output annotation file")->required();
    auto* strict_flag = rm_cmd->add_flag("--strict", "fail on labels missing from the map (default)");
    rm_cmd->add_flag("--drop-unmapped", drop_unmapped, "drop annotations with unmapped labels")
        ->excludes(strict_flag);

    SplitOptions sp;
    std::string sp_manifest, sp_substring, sp_out;
    auto* sp_cmd = app.add_subcommand("split", "partition a dataset into night and day files");
    sp_cmd->add_option("dataset", sp.dataset_file, "annotation file")->required();
    auto* manifest_opt = sp_cmd->add_option("manifest", sp_manifest, "CSV with header image,phase");
    sp_cmd->add_option("--night-substring", sp_substring, "tag file names containing this as night")
        ->excludes(manifest_opt);
    sp_cmd->add_option("--out-dir", sp_out, "output directory (default: beside the dataset)");

    EvalOptions ev;
    std::string ev_format = "md", ev_test_tag, ev_report;
    auto* ev_cmd = app.add_subcommand("eval", "per-class AP and mAP table");
    ev_cmd->add_option("gt", ev.gt_file, "ground-truth annotation file")->required();
    ev_cmd->add_option("detections", ev.detections, "detection files, optionally TAG=path")->required();
    ev_cmd->add_option("--iou-threshold", ev.iou_threshold, "match threshold")
        ->check(CLI::Range(0.0, 1.0));
    ev_cmd->add_option("--format", ev_format, "md or csv")->check(CLI::IsMember({"md", "markdown", "csv"}));
    ev_cmd->add_option("--test-tag", ev_test_tag, "test dataset column (default: gt file stem)");
    ev_cmd->add_option("--report", ev_report, "write the table here, JSON report beside it");

    std::string sv_workspace, sv_host = "127.0.0.1", sv_ui;
    int sv_port = 8765;
    auto* sv_cmd = app.add_subcommand("serve", "run the correspondence picker service");
    sv_cmd->add_option("workspace", sv_workspace, "workspace directory")->required();
    sv_cmd->add_option("--port", sv_port, "TCP port")->check(CLI::Range(0, 65535));
    sv_cmd->add_option("--host", sv_host, "bind address");
    sv_cmd->add_option("--ui-dir", sv_ui, "static UI assets to serve at /");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }

    if (*reg_cmd) {
        if (!reg_summary.empty()) reg.summary_file = reg_summary;
        return run_register(reg, std::cout, std::cerr);
    }
    if (*tr_cmd) {
        tr.policy.clip_to_frame = !no_clip;
        if (!tr_corr.empty()) tr.correspondences_dir = tr_corr;
        return run_transfer(tr, std::cout, std::cerr);
    }
    if (*rm_cmd) {
        rm.strict = !drop_unmapped;
        return run_remap(rm, std::cout, std::cerr);
    }
    if (*sp_cmd) {
        if (!sp_manifest.empty()) sp.manifest_file = sp_manifest;
        if (!sp_substring.empty()) sp.night_substring = sp_substring;
        if (!sp_out.empty()) sp.out_dir = sp_out;
        return run_split(sp, std::cout, std::cerr);
    }
    if (*ev_cmd) {
        ev.format = ev_format == "csv" ? xspec::TableFormat::Csv : xspec::TableFormat::Markdown;
        if (!ev_test_tag.empty()) ev.test_tag = ev_test_tag;
        if (!ev_report.empty()) ev.report_file = ev_report;
        return run_eval(ev, std::cout, std::cerr);
    }
    if (*sv_cmd) return run_serve(sv_workspace, sv_host, sv_port, sv_ui);
    return kExitInput;
}

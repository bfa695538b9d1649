#pragma once

// On-disk registration workspace and the per-pair correspondence state the
// picker service mutates.
//
//   <root>/pairs.json                    pairing file
//   <root>/images/                       thermal and visible image files
//   <root>/annotations.json              optional thermal dataset (previews)
//   <root>/correspondences/<pair>.json   picked points (+ "revision")
//   <root>/homographies/<pair>.json      exported fits
//   <root>/events.log                    one JSON event per line

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "xspec/geometry_io.hpp"
#include "xspec/transfer.hpp"

namespace xspec {

namespace fs = std::filesystem;

enum class EventAction { AddPoint, DeletePoint, Refit, Export };

inline std::string_view to_string(EventAction a) {
    switch (a) {
        case EventAction::AddPoint: return "add_point";
        case EventAction::DeletePoint: return "delete_point";
        case EventAction::Refit: return "refit";
        case EventAction::Export: return "export";
    }
    return "unknown";
}

struct SessionEvent {
    std::uint64_t sequence = 0;
    std::string pair_id;
    EventAction action = EventAction::AddPoint;
    std::string timestamp;  // UTC, ISO 8601
    std::uint64_t revision = 0;
};

inline Json to_json(const SessionEvent& e) {
    return Json{{"seq", e.sequence},
                {"pair_id", e.pair_id},
                {"action", std::string(to_string(e.action))},
                {"timestamp", e.timestamp},
                {"revision", e.revision}};
}

/// Immutable snapshot of one pair. `fit` is present exactly when the current
/// points admit one; otherwise `fit_error` says why.
struct PairState {
    ImagePair pair;
    std::vector<Correspondence> points;
    std::uint64_t revision = 0;
    std::optional<Homography> fit;
    std::optional<FitDiagnostics> diagnostics;
    std::optional<ErrorCode> fit_error;
};

inline void refit(PairState& s) {
    s.fit.reset();
    s.diagnostics.reset();
    s.fit_error.reset();
    try {
        s.fit = fit_homography(s.points);
        s.diagnostics = residuals(*s.fit, s.points);
    } catch (const Error& e) {
        s.fit.reset();
        s.fit_error = e.code();
    }
}

struct PreviewBox {
    RecordId annotation_id = 0;
    std::string category;
    BBox source;
    std::optional<BBox> target;  // envelope in the visible frame; empty at infinity
};

enum class ImageSide { Source, Target };

class Workspace {
public:
    explicit Workspace(fs::path root) : root_(std::move(root)) { load(); }

    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

    const fs::path& root() const { return root_; }
    fs::path pairs_file() const { return root_ / "pairs.json"; }
    fs::path images_dir() const { return root_ / "images"; }
    fs::path annotations_file() const { return root_ / "annotations.json"; }
    fs::path correspondences_dir() const { return root_ / "correspondences"; }
    fs::path homographies_dir() const { return root_ / "homographies"; }
    fs::path events_file() const { return root_ / "events.log"; }
    fs::path correspondence_file(const std::string& id) const {
        return correspondences_dir() / (id + ".json");
    }

    std::vector<std::shared_ptr<const PairState>> pairs() const {
        std::vector<std::shared_ptr<const PairState>> out;
        for (const auto& id : order_) out.push_back(snapshot(slot(id)));
        return out;
    }

    std::shared_ptr<const PairState> pair(const std::string& id) const { return snapshot(slot(id)); }

    std::shared_ptr<const PairState> add_point(const std::string& id, const Correspondence& c,
                                               std::uint64_t expected_revision) {
        if (!c.source.is_finite() || !c.target.is_finite()) {
            throw Error(ErrorCode::NonFinite, "point coordinates must be finite", id);
        }
        return mutate(id, expected_revision, EventAction::AddPoint,
                      [&](PairState& s) { s.points.push_back(c); });
    }

    std::shared_ptr<const PairState> delete_point(const std::string& id, std::size_t index,
                                                  std::uint64_t expected_revision) {
        return mutate(id, expected_revision, EventAction::DeletePoint, [&](PairState& s) {
            if (index >= s.points.size()) {
                throw Error(ErrorCode::MalformedField,
                            "no point at index " + std::to_string(index), id);
            }
            s.points.erase(s.points.begin() + static_cast<std::ptrdiff_t>(index));
        });
    }

    /// Writes homographies/<pair>.json from the current fit.
    fs::path export_homography(const std::string& id) {
        Slot& sl = slot(id);
        std::lock_guard lock(sl.write);
        const auto s = snapshot(sl);
        if (!s->fit) {
            throw Error(s->fit_error.value_or(ErrorCode::TooFewPoints), "pair has no fit to export", id);
        }
        const fs::path path = homographies_dir() / (id + ".json");
        write_atomically(path, write_homography_file(id, *s->fit));
        append_event(id, EventAction::Export, s->revision);
        return path;
    }

    std::vector<PreviewBox> preview(const std::string& id) const { return preview(*pair(id)); }

    /// Source annotations of the pair's thermal image projected by the snapshot's fit.
    std::vector<PreviewBox> preview(const PairState& s) const {
        std::vector<PreviewBox> out;
        if (!s.fit || !annotations_) return out;
        const ImageRecord* im = find_image_by_name(*annotations_, s.pair.source_image);
        if (!im) return out;
        std::vector<const AnnotationRecord*> anns;
        for (const auto& a : annotations_->annotations) {
            if (a.image_id == im->id) anns.push_back(&a);
        }
        std::sort(anns.begin(), anns.end(), [](auto* a, auto* b) { return a->id < b->id; });
        for (const AnnotationRecord* a : anns) {
            PreviewBox b{a->id, annotations_->find_category(a->category_id)->name, a->bbox, std::nullopt};
            try {
                b.target = project_bbox(*s.fit, a->bbox);
            } catch (const Error&) {
            }
            out.push_back(std::move(b));
        }
        return out;
    }

    fs::path image_path(const std::string& id, ImageSide side) const {
        const auto s = pair(id);
        return images_dir() / (side == ImageSide::Source ? s->pair.source_image : s->pair.target_image);
    }

    std::vector<SessionEvent> events() const {
        std::lock_guard lock(log_mutex_);
        return read_events();
    }

private:
    struct Slot {
        std::mutex write;         // serializes mutations of this pair
        mutable std::mutex read;  // guards the snapshot pointer swap only
        std::shared_ptr<const PairState> state;
    };

    void load() {
        if (!fs::exists(pairs_file())) {
            throw Error(ErrorCode::Io, "workspace has no pairs.json", root_.string());
        }
        const auto pairs = parse_pairs(read_text_file(pairs_file()), pairs_file().string());
        if (fs::exists(annotations_file())) {
            annotations_ = parse_dataset(read_text_file(annotations_file()), annotations_file().string());
        }
        {
            std::lock_guard lock(log_mutex_);
            for (const auto& e : read_events()) next_seq_ = std::max(next_seq_, e.sequence + 1);
        }
        for (const auto& p : pairs) {
            auto state = std::make_shared<PairState>();
            state->pair = p;
            const fs::path file = correspondence_file(p.pair_id);
            if (fs::exists(file)) {
                const std::string text = read_text_file(file);
                const CorrespondenceSet set = parse_correspondence_set(text, file.string());
                state->points = set.points;
                const Json j = parse_json(text, file.string());
                if (auto it = j.find("revision"); it != j.end()) {
                    state->revision = it->get<std::uint64_t>();
                }
            }
            refit(*state);
            auto sl = std::make_unique<Slot>();
            sl->state = std::move(state);
            slots_.emplace(p.pair_id, std::move(sl));
            order_.push_back(p.pair_id);
        }
    }

    Slot& slot(const std::string& id) const {
        auto it = slots_.find(id);
        if (it == slots_.end()) throw Error(ErrorCode::UnknownPair, "no such pair", id);
        return *it->second;
    }

    static std::shared_ptr<const PairState> snapshot(const Slot& sl) {
        std::lock_guard lock(sl.read);
        return sl.state;
    }

    template <typename Fn>
    std::shared_ptr<const PairState> mutate(const std::string& id, std::uint64_t expected_revision,
                                            EventAction action, Fn&& change) {
        Slot& sl = slot(id);
        std::lock_guard lock(sl.write);
        const auto current = snapshot(sl);
        if (current->revision != expected_revision) {
            throw Error(ErrorCode::StaleRevision,
                        "expected revision " + std::to_string(current->revision) + ", got " +
                            std::to_string(expected_revision),
                        id);
        }
        auto next = std::make_shared<PairState>(*current);
        change(*next);
        ++next->revision;
        refit(*next);

        persist(*next);
        append_event(id, action, next->revision);
        append_event(id, EventAction::Refit, next->revision);

        std::shared_ptr<const PairState> published = std::move(next);
        {
            std::lock_guard rl(sl.read);
            sl.state = published;
        }
        return published;
    }

    void persist(const PairState& s) {
        CorrespondenceSet set{s.pair.pair_id, s.pair.source_image, s.pair.target_image, s.points};
        Json j = parse_json(write_correspondence_set(set));
        j["revision"] = s.revision;
        write_atomically(correspondence_file(s.pair.pair_id), dump_json(j));
    }

    static void write_atomically(const fs::path& path, const std::string& text) {
        fs::path tmp = path;
        tmp += ".tmp";
        write_text_file(tmp, text);
        fs::rename(tmp, path);
    }

    static std::string utc_now() {
        const auto now = std::chrono::system_clock::now();
        const std::time_t t = std::chrono::system_clock::to_time_t(now);
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()) % 1000;
        std::tm tm{};
        gmtime_r(&t, &tm);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                      tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                      static_cast<int>(ms.count()));
        return buf;
    }

    void append_event(const std::string& id, EventAction action, std::uint64_t revision) {
        std::lock_guard lock(log_mutex_);
        SessionEvent e{next_seq_++, id, action, utc_now(), revision};
        std::ofstream out(events_file(), std::ios::app | std::ios::binary);
        if (!out) throw Error(ErrorCode::Io, "cannot append to event log", events_file().string());
        out << to_json(e).dump() << '\n';
        out.flush();
    }

    // Caller holds log_mutex_. A torn final line (crash mid-write) is skipped.
    std::vector<SessionEvent> read_events() const {
        std::vector<SessionEvent> out;
        std::ifstream in(events_file());
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            Json j = Json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object()) continue;
            SessionEvent e;
            e.sequence = j.value("seq", std::uint64_t{0});
            e.pair_id = j.value("pair_id", std::string{});
            const std::string action = j.value("action", std::string{});
            for (auto a : {EventAction::AddPoint, EventAction::DeletePoint, EventAction::Refit,
                           EventAction::Export}) {
                if (to_string(a) == action) e.action = a;
            }
            e.timestamp = j.value("timestamp", std::string{});
            e.revision = j.value("revision", std::uint64_t{0});
            out.push_back(std::move(e));
        }
        return out;
    }

    fs::path root_;
    std::map<std::string, std::unique_ptr<Slot>> slots_;
    std::vector<std::string> order_;
    std::optional<Dataset> annotations_;
    mutable std::mutex log_mutex_;
    std::uint64_t next_seq_ = 1;
};

}  // namespace xspec

#pragma once

// Local HTTP API behind the correspondence picker.
//
//   GET    /api/pairs
//   GET    /api/pairs/{id}
//   GET    /api/pairs/{id}/image/{source|target}
//   GET    /api/pairs/{id}/correspondences
//   POST   /api/pairs/{id}/correspondences          {sx, sy, tx, ty, revision}
//   DELETE /api/pairs/{id}/correspondences/{index}?revision=N
//   GET    /api/pairs/{id}/homography
//   GET    /api/pairs/{id}/preview
//   POST   /api/pairs/{id}/export
//
// 404 unknown pair, 409 stale revision, 422 invalid payload.

#include <atomic>
#include <charconv>
#include <filesystem>
#include <string>

#include "xspec/workspace.hpp"

// after Eigen: <resolv.h> defines a `_res` macro that collides with Eigen parameter names
#include <httplib.h>

namespace xspec {

inline Json pair_summary_json(const PairState& s) {
    return Json{{"pair_id", s.pair.pair_id},
                {"source_image", s.pair.source_image},
                {"target_image", s.pair.target_image},
                {"target_width", s.pair.target_width},
                {"target_height", s.pair.target_height},
                {"revision", s.revision},
                {"point_count", s.points.size()},
                {"fitted", s.fit.has_value()}};
}

inline Json correspondences_json(const PairState& s) {
    Json points = Json::array();
    for (const auto& c : s.points) points.push_back(to_json(c));
    return Json{{"pair_id", s.pair.pair_id}, {"revision", s.revision}, {"points", points}};
}

inline Json homography_json(const PairState& s) {
    Json j{{"pair_id", s.pair.pair_id}, {"revision", s.revision}};
    if (s.fit) {
        j["matrix"] = matrix_to_json(*s.fit);
        j["rmse"] = s.diagnostics->rmse;
        j["max_error"] = s.diagnostics->max_error;
        j["per_point"] = s.diagnostics->per_point;
        j["reason"] = nullptr;
    } else {
        j["matrix"] = nullptr;
        j["rmse"] = nullptr;
        j["max_error"] = nullptr;
        j["per_point"] = Json::array();
        j["reason"] = std::string(to_string(s.fit_error.value_or(ErrorCode::TooFewPoints)));
    }
    return j;
}

inline Json bbox_json(const BBox& b) { return Json{b.x, b.y, b.w, b.h}; }

inline std::string content_type_for(const fs::path& p) {
    std::string ext = p.extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".png") return "image/png";
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".tif" || ext == ".tiff") return "image/tiff";
    if (ext == ".bmp") return "image/bmp";
    if (ext == ".webp") return "image/webp";
    return "application/octet-stream";
}

class Service {
public:
    explicit Service(Workspace& ws, std::filesystem::path ui_dir = {}) : ws_(ws) {
        // httplib defaults to SO_REUSEPORT, which would let a second instance share the port
        server_.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
        });
        routes();
        if (!ui_dir.empty() && std::filesystem::is_directory(ui_dir)) {
            server_.set_mount_point("/", ui_dir.string());
        }
    }

    /// Binds the socket; returns the bound port. Throws Io when the address
    /// is unavailable (e.g. port already in use). Port 0 picks a free port.
    int bind(const std::string& host, int port) {
        if (port == 0) {
            const int p = server_.bind_to_any_port(host);
            if (p < 0) throw Error(ErrorCode::Io, "cannot bind", host);
            port_ = p;
        } else {
            if (!server_.bind_to_port(host, port)) {
                throw Error(ErrorCode::Io, "cannot bind port " + std::to_string(port) + " (in use?)",
                            host);
            }
            port_ = port;
        }
        return port_;
    }

    /// Blocks until stop().
    bool run() { return server_.listen_after_bind(); }
    void stop() { server_.stop(); }
    bool running() const { return server_.is_running(); }
    void wait_until_ready() const { server_.wait_until_ready(); }
    int port() const { return port_; }

private:
    static void send_json(httplib::Response& res, const Json& j, int status = 200) {
        res.status = status;
        res.set_content(j.dump(), "application/json");
    }

    static void send_error(httplib::Response& res, const Error& e) {
        int status = 422;
        switch (e.code()) {
            case ErrorCode::UnknownPair: status = 404; break;
            case ErrorCode::StaleRevision: status = 409; break;
            case ErrorCode::Io: status = 500; break;
            default: break;
        }
        send_json(res,
                  Json{{"error", std::string(to_string(e.code()))},
                       {"message", e.message()},
                       {"locator", e.locator()}},
                  status);
    }

    template <typename Fn>
    static httplib::Server::Handler guarded(Fn fn) {
        return [fn](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const Error& e) {
                send_error(res, e);
            } catch (const std::exception& e) {
                send_json(res, Json{{"error", "Internal"}, {"message", e.what()}}, 500);
            }
        };
    }

    static std::uint64_t parse_revision(const Json& j) {
        const std::int64_t rev = json_field::integer(j, "revision", "request");
        if (rev < 0) throw Error(ErrorCode::MalformedField, "revision must be nonnegative", "request");
        return static_cast<std::uint64_t>(rev);
    }

    static std::uint64_t parse_unsigned(const std::string& text, const std::string& what) {
        std::uint64_t v = 0;
        const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
        if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
            throw Error(ErrorCode::MalformedField, what + " must be a nonnegative integer", "request");
        }
        return v;
    }

    void routes() {
        server_.Get("/api/pairs", guarded([this](const auto&, auto& res) {
            Json list = Json::array();
            for (const auto& s : ws_.pairs()) list.push_back(pair_summary_json(*s));
            send_json(res, list);
        }));

        server_.Get(R"(/api/pairs/([^/]+))", guarded([this](const auto& req, auto& res) {
            const auto s = ws_.pair(req.matches[1]);
            Json j = pair_summary_json(*s);
            j["points"] = correspondences_json(*s)["points"];
            send_json(res, j);
        }));

        server_.Get(R"(/api/pairs/([^/]+)/image/(source|target))",
                    guarded([this](const auto& req, auto& res) {
                        const auto side = req.matches[2] == "source" ? ImageSide::Source : ImageSide::Target;
                        const fs::path path = ws_.image_path(req.matches[1], side);
                        if (!fs::is_regular_file(path)) {
                            send_json(res, Json{{"error", "NotFound"}, {"message", "image file missing"},
                                                {"locator", path.filename().string()}},
                                      404);
                            return;
                        }
                        res.set_content(read_text_file(path), content_type_for(path));
                    }));

        server_.Get(R"(/api/pairs/([^/]+)/correspondences)",
                    guarded([this](const auto& req, auto& res) {
                        send_json(res, correspondences_json(*ws_.pair(req.matches[1])));
                    }));

        server_.Post(R"(/api/pairs/([^/]+)/correspondences)",
                     guarded([this](const auto& req, auto& res) {
                         const std::string id = req.matches[1];
                         ws_.pair(id);  // 404 before payload validation
                         const Json body = parse_json(req.body, "request");
                         const Correspondence c = correspondence_from_json(body, "request");
                         const auto s = ws_.add_point(id, c, parse_revision(body));
                         Json j = correspondences_json(*s);
                         j["homography"] = homography_json(*s);
                         send_json(res, j);
                     }));

        server_.Delete(R"(/api/pairs/([^/]+)/correspondences/(\d+))",
                       guarded([this](const auto& req, auto& res) {
                           const std::string id = req.matches[1];
                           ws_.pair(id);
                           if (!req.has_param("revision")) {
                               throw Error(ErrorCode::MissingField, "revision query parameter required",
                                           "request");
                           }
                           const auto rev = parse_unsigned(req.get_param_value("revision"), "revision");
                           const auto index = parse_unsigned(req.matches[2], "index");
                           const auto s = ws_.delete_point(id, static_cast<std::size_t>(index), rev);
                           Json j = correspondences_json(*s);
                           j["homography"] = homography_json(*s);
                           send_json(res, j);
                       }));

        server_.Get(R"(/api/pairs/([^/]+)/homography)", guarded([this](const auto& req, auto& res) {
            send_json(res, homography_json(*ws_.pair(req.matches[1])));
        }));

        server_.Get(R"(/api/pairs/([^/]+)/preview)", guarded([this](const auto& req, auto& res) {
            const std::string id = req.matches[1];
            const auto s = ws_.pair(id);
            Json boxes = Json::array();
            for (const auto& b : ws_.preview(*s)) {
                boxes.push_back(Json{{"annotation_id", b.annotation_id},
                                     {"category", b.category},
                                     {"source_bbox", bbox_json(b.source)},
                                     {"target_bbox", b.target ? bbox_json(*b.target) : Json(nullptr)}});
            }
            send_json(res, Json{{"pair_id", id},
                                {"revision", s->revision},
                                {"fitted", s->fit.has_value()},
                                {"boxes", boxes}});
        }));

        server_.Post(R"(/api/pairs/([^/]+)/export)", guarded([this](const auto& req, auto& res) {
            const fs::path path = ws_.export_homography(req.matches[1]);
            send_json(res, Json{{"pair_id", std::string(req.matches[1])}, {"path", path.string()}});
        }));
    }

    Workspace& ws_;
    httplib::Server server_;
    int port_ = 0;
};

}  // namespace xspec

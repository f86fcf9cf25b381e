// SPDX-License-Identifier: Apache-2.0
#include "gencomp/service.h"

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

#include "gencomp/checkpoint.h"
#include "gencomp/error.h"
#include "gencomp/io.h"
#include "gencomp/runtime.h"
#include "httplib.h"
#include "json.hpp"

namespace gencomp {
namespace {

using nlohmann::json;

enum class JobStatus { kQueued, kRunning, kDone, kFailed };

const char* StatusName(JobStatus s) {
  switch (s) {
    case JobStatus::kQueued: return "queued";
    case JobStatus::kRunning: return "running";
    case JobStatus::kDone: return "done";
    case JobStatus::kFailed: return "failed";
  }
  return "?";
}

struct ComposeJob {
  std::string id;
  std::string background_path;
  std::string foreground_path;
  std::filesystem::path checkpoint;
  ComposeRequest request;
  JobStatus status = JobStatus::kQueued;
  std::filesystem::path result_path;
  std::string error;
  VideoTensor result;
};

// 400 with the offending field named.
struct BadRequest {
  std::string field;
  std::string message;
};

void Reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  httplib::Server server;

  std::mutex mu;
  std::condition_variable cv;
  std::map<std::string, std::shared_ptr<ComposeJob>> jobs;
  std::deque<std::string> queue;
  long next_id = 1;
  bool stopping = false;
  std::thread worker;
  std::map<std::filesystem::path, std::shared_ptr<LoadedCheckpoint>> models;  // worker only

  explicit Impl(ServiceOptions opts) : options(std::move(opts)) {
    if (options.data_root.empty()) options.data_root = DataRoot();
    Routes();
    worker = std::thread([this] { WorkLoop(); });
  }

  ~Impl() {
    {
      std::lock_guard<std::mutex> lock(mu);
      stopping = true;
    }
    cv.notify_all();
    server.stop();
    if (worker.joinable()) worker.join();
  }

  std::filesystem::path ResolveCheckpoint(const std::string& requested) const {
    if (!requested.empty()) {
      std::filesystem::path p(requested);
      if (p.is_relative() && !std::filesystem::exists(p)) p = options.checkpoint_dir / p;
      if (!std::filesystem::is_regular_file(p)) throw BadRequest{"checkpoint", "no such checkpoint: " + requested};
      return p;
    }
    std::vector<std::filesystem::path> found;
    if (std::filesystem::is_directory(options.checkpoint_dir)) {
      for (const auto& e : std::filesystem::directory_iterator(options.checkpoint_dir)) {
        if (e.path().extension() == ".gcmp") found.push_back(e.path());
      }
    }
    if (found.empty()) throw BadRequest{"checkpoint", "no checkpoint given and none found in " + options.checkpoint_dir.string()};
    std::sort(found.begin(), found.end());
    return found.front();
  }

  static VideoTensor LoadVideoField(const std::string& field, const std::filesystem::path& p) {
    try {
      return ReadVideo(p);
    } catch (const Error& e) {
      throw BadRequest{field, e.what()};
    }
  }

  std::shared_ptr<ComposeJob> ParseJson(const std::string& body) {
    json j;
    try {
      j = json::parse(body);
    } catch (const json::exception& e) {
      throw BadRequest{"$", std::string("malformed JSON: ") + e.what()};
    }
    if (!j.is_object()) throw BadRequest{"$", "request body must be a JSON object"};
    auto job = std::make_shared<ComposeJob>();
    auto text = [&](const char* key, bool required) -> std::string {
      if (!j.contains(key)) {
        if (required) throw BadRequest{key, "required"};
        return {};
      }
      if (!j.at(key).is_string()) throw BadRequest{key, "must be a string"};
      return j.at(key).get<std::string>();
    };
    job->background_path = text("background", true);
    job->foreground_path = text("foreground", true);
    const std::string mask_path = text("foreground_mask", false);
    if (!j.contains("control")) throw BadRequest{"control", "required"};
    const json& control = j.at("control");
    ParseControl(*job, control.is_string() ? control.get<std::string>() : control.dump());
    job->checkpoint = ResolveCheckpoint(text("checkpoint", false));
    ReadNumbers(*job, j);
    job->request.background = LoadVideoField("background", job->background_path);
    job->request.foreground = LoadVideoField("foreground", job->foreground_path);
    if (!mask_path.empty()) {
      job->request.foreground_mask = VideoToMask(LoadVideoField("foreground_mask", mask_path));
    }
    return job;
  }

  std::shared_ptr<ComposeJob> ParseMultipart(const httplib::Request& req) {
    auto job = std::make_shared<ComposeJob>();
    auto part = [&](const char* key, bool required) -> std::optional<std::string> {
      if (!req.has_file(key)) {
        if (required) throw BadRequest{key, "required"};
        return std::nullopt;
      }
      return req.get_file_value(key).content;
    };
    auto upload = [&](const char* key, bool required) -> std::optional<VideoTensor> {
      auto content = part(key, required);
      if (!content) return std::nullopt;
      const auto tmp = options.data_root / "uploads" / (std::string(key) + "_" + std::to_string(
          std::hash<std::thread::id>{}(std::this_thread::get_id())) + ".gctv");
      WriteTextFile(tmp, *content);
      VideoTensor v = LoadVideoField(key, tmp);
      std::filesystem::remove(tmp);
      return v;
    };
    ParseControl(*job, *part("control", true));
    job->checkpoint = ResolveCheckpoint(part("checkpoint", false).value_or(""));
    json numbers = json::object();
    for (const char* key : {"steps", "seed"}) {
      if (auto v = part(key, false)) {
        try {
          numbers[key] = json::parse(*v);
        } catch (const json::exception&) {
          throw BadRequest{key, "must be an integer"};
        }
      }
    }
    ReadNumbers(*job, numbers);
    job->background_path = "(upload)";
    job->foreground_path = "(upload)";
    job->request.background = *upload("background", true);
    job->request.foreground = *upload("foreground", true);
    if (auto m = upload("foreground_mask", false)) job->request.foreground_mask = VideoToMask(*m);
    return job;
  }

  void ParseControl(ComposeJob& job, const std::string& text) {
    try {
      job.request.control = ParseControlSpec(text);
    } catch (const FieldError& e) {
      throw BadRequest{"control." + e.field(), e.what()};
    } catch (const InvalidInput& e) {
      throw BadRequest{"control", e.what()};
    }
  }

  void ReadNumbers(ComposeJob& job, const json& j) {
    job.request.steps = options.default_steps;
    if (j.contains("steps")) {
      if (!j.at("steps").is_number_integer() || j.at("steps").get<int>() < 1) {
        throw BadRequest{"steps", "must be a positive integer"};
      }
      job.request.steps = j.at("steps").get<int>();
    }
    if (j.contains("seed")) {
      if (!j.at("seed").is_number_unsigned()) throw BadRequest{"seed", "must be a non-negative integer"};
      job.request.seed = j.at("seed").get<std::uint64_t>();
    }
  }

  void Validate(const ComposeJob& job) {
    const Dims bg = job.request.background.dims();
    try {
      ValidateControlSpec(job.request.control, &bg);
    } catch (const FieldError& e) {
      throw BadRequest{"control." + e.field(), e.what()};
    }
    if (job.request.foreground.channels() != job.request.background.channels()) {
      throw BadRequest{"foreground", "channel count differs from the background"};
    }
    if (job.request.foreground_mask && job.request.foreground_mask->dims() != job.request.foreground.dims()) {
      throw BadRequest{"foreground_mask", "dims differ from the foreground video"};
    }
  }

  std::string Enqueue(std::shared_ptr<ComposeJob> job) {
    std::lock_guard<std::mutex> lock(mu);
    char id[32];
    std::snprintf(id, sizeof(id), "job-%06ld", next_id++);
    job->id = id;
    jobs[job->id] = job;
    queue.push_back(job->id);
    cv.notify_one();
    return job->id;
  }

  void WorkLoop() {
    for (;;) {
      std::shared_ptr<ComposeJob> job;
      {
        std::unique_lock<std::mutex> lock(mu);
        cv.wait(lock, [this] { return stopping || !queue.empty(); });
        if (stopping) return;
        job = jobs.at(queue.front());
        queue.pop_front();
        job->status = JobStatus::kRunning;
      }
      VideoTensor result;
      std::filesystem::path out_dir;
      std::string error;
      try {
        auto& ckpt = models[job->checkpoint];
        if (!ckpt) ckpt = std::make_shared<LoadedCheckpoint>(LoadCheckpoint(job->checkpoint));
        const DiffusionSchedule sched =
            MakeSchedule(ckpt->model->config().diffusion_steps, ckpt->meta.schedule);
        result = Compose(*ckpt->model, sched, job->request).video;
        out_dir = options.data_root / "jobs" / job->id / "output";
        WriteFrames(result, out_dir);
      } catch (const std::exception& e) {
        error = e.what();
      }
      std::lock_guard<std::mutex> lock(mu);
      if (error.empty()) {
        job->result = std::move(result);
        job->result_path = out_dir;
        job->status = JobStatus::kDone;
      } else {
        job->error = error;
        job->status = JobStatus::kFailed;
      }
      job->request.background = VideoTensor();
      job->request.foreground = VideoTensor();
    }
  }

  void Routes() {
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      Reply(res, 200, {{"status", "ok"}});
    });

    server.Post("/jobs/compose", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        auto job = req.is_multipart_form_data() ? ParseMultipart(req) : ParseJson(req.body);
        Validate(*job);
        const std::string id = Enqueue(std::move(job));
        Reply(res, 202, {{"id", id}, {"status", "queued"}});
      } catch (const BadRequest& e) {
        Reply(res, 400, {{"error", e.message}, {"field", e.field}});
      } catch (const std::exception& e) {
        Reply(res, 500, {{"error", e.what()}});
      }
    });

    server.Get(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard<std::mutex> lock(mu);
      auto it = jobs.find(req.matches[1]);
      if (it == jobs.end()) return Reply(res, 404, {{"error", "unknown job"}, {"id", req.matches[1]}});
      const ComposeJob& job = *it->second;
      json body = {{"id", job.id},
                   {"status", StatusName(job.status)},
                   {"background", job.background_path},
                   {"foreground", job.foreground_path},
                   {"control", json::parse(SerializeControlSpec(job.request.control))},
                   {"steps", job.request.steps}};
      body["result_path"] = job.status == JobStatus::kDone ? json(job.result_path.string()) : json(nullptr);
      if (job.status == JobStatus::kDone) body["frames"] = job.result.frames();
      if (job.status == JobStatus::kFailed) body["error"] = job.error;
      Reply(res, 200, body);
    });

    server.Get(R"(/videos/([^/]+)/frame/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::unique_lock<std::mutex> lock(mu);
      auto it = jobs.find(req.matches[1]);
      if (it == jobs.end()) return Reply(res, 404, {{"error", "unknown job"}, {"id", req.matches[1]}});
      auto job = it->second;
      if (job->status != JobStatus::kDone) {
        return Reply(res, 409, {{"error", "job is not done"}, {"status", StatusName(job->status)}});
      }
      const long n = std::stol(req.matches[2]);
      if (n < 0 || n >= job->result.frames()) {
        return Reply(res, 404, {{"error", "frame out of range"}, {"frames", job->result.frames()}});
      }
      lock.unlock();  // a done job's result is never written again
      const auto png = EncodePng(job->result, static_cast<int>(n));
      res.status = 200;
      res.set_content(reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
    });

    if (options.ui_dir) {
      if (!server.set_mount_point("/ui", options.ui_dir->string())) {
        throw IoError(options.ui_dir->string(), "cannot mount UI directory");
      }
    }
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}
Service::~Service() = default;

int Service::Bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError(host, "cannot bind any port");
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw IoError(host + ":" + std::to_string(port), "cannot bind");
  return port;
}

void Service::Listen() { impl_->server.listen_after_bind(); }

void Service::Stop() { impl_->server.stop(); }

}  // namespace gencomp

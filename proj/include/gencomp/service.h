// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace gencomp {

struct ServiceOptions {
  std::filesystem::path checkpoint_dir = ".";
  std::filesystem::path data_root;  // job outputs go under <data_root>/jobs
  std::optional<std::filesystem::path> ui_dir;  // served at /ui when set
  int default_steps = 20;
};

// HTTP front end for compose jobs:
//   POST /jobs/compose            JSON with paths, or multipart with GCTV uploads
//   GET  /jobs/{id}               status and result path
//   GET  /videos/{id}/frame/{n}   PNG of a finished job's frame
//   GET  /healthz
// Jobs run one at a time, in submission order, on a single worker thread.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Returns the bound port; pass 0 for any free port. Throws IoError.
  int Bind(const std::string& host, int port);
  // Blocks until Stop().
  void Listen();
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gencomp

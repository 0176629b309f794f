#ifndef EDIAG_SRC_SUBPROCESS_H_
#define EDIAG_SRC_SUBPROCESS_H_

#include <sys/types.h>

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ediag::subprocess {

struct SpawnOptions {
  std::vector<std::string> argv;
  // Added to (and overriding) the parent's environment.
  std::map<std::string, std::string> env;
  std::string working_dir;
  std::optional<std::vector<int>> cpu_affinity;
  // When true, stdout and stderr share one pipe returned as output_fd;
  // otherwise both go to /dev/null.
  bool capture_output = true;
};

struct Child {
  pid_t pid = -1;
  int output_fd = -1;
  std::vector<std::string> warnings;
};

// The child leads its own process group. Throws Error{kSpawnFailure} when
// exec fails; an affinity the kernel rejects becomes a warning.
Child Spawn(const SpawnOptions& options);

// Blocks until exit. Returns the exit status, or 128 + signal number.
int Wait(pid_t pid);

// Non-blocking; returns the status once the child has exited.
std::optional<int> TryWait(pid_t pid);

// SIGTERM to the child's process group, SIGKILL after `grace`, then reaps.
int Terminate(pid_t pid, std::chrono::milliseconds grace);

}  // namespace ediag::subprocess

#endif  // EDIAG_SRC_SUBPROCESS_H_

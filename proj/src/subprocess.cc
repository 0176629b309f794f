#include "subprocess.h"

#include <fcntl.h>
#include <sched.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "ediag/error.h"

extern char** environ;

namespace ediag::subprocess {

namespace {

// Records the child sends back over the close-on-exec status pipe.
enum : int { kAffinityFailed = 1, kChdirFailed = 2, kExecFailed = 3 };

struct StatusRecord {
  int kind;
  int err;
};

void WriteRecord(int fd, int kind, int err) {
  StatusRecord rec{kind, err};
  ssize_t ignored = write(fd, &rec, sizeof(rec));
  (void)ignored;
}

int StatusToCode(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

}  // namespace

Child Spawn(const SpawnOptions& options) {
  if (options.argv.empty())
    throw Error(ErrorCode::kSpawnFailure, "empty command");

  // Everything the child needs is built before fork; between fork and exec
  // the child only makes async-signal-safe calls.
  std::vector<char*> argv;
  for (const std::string& a : options.argv)
    argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  std::map<std::string, std::string> merged;
  for (char** e = environ; e && *e; ++e) {
    std::string kv(*e);
    size_t eq = kv.find('=');
    if (eq != std::string::npos) merged[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  for (const auto& [k, v] : options.env) merged[k] = v;
  std::vector<std::string> env_strings;
  for (const auto& [k, v] : merged) env_strings.push_back(k + "=" + v);
  std::vector<char*> envp;
  for (std::string& s : env_strings) envp.push_back(s.data());
  envp.push_back(nullptr);

  cpu_set_t cpus;
  CPU_ZERO(&cpus);
  if (options.cpu_affinity) {
    for (int cpu : *options.cpu_affinity)
      if (cpu >= 0 && cpu < CPU_SETSIZE) CPU_SET(cpu, &cpus);
  }

  int out_pipe[2] = {-1, -1};
  int status_pipe[2];
  if (options.capture_output && pipe2(out_pipe, O_CLOEXEC) != 0)
    throw Error(ErrorCode::kSpawnFailure, std::string("pipe: ") + strerror(errno));
  if (pipe2(status_pipe, O_CLOEXEC) != 0)
    throw Error(ErrorCode::kSpawnFailure, std::string("pipe: ") + strerror(errno));

  const char* workdir =
      options.working_dir.empty() ? nullptr : options.working_dir.c_str();
  const bool pin = options.cpu_affinity.has_value();

  pid_t pid = fork();
  if (pid < 0) {
    int err = errno;
    if (options.capture_output) {
      close(out_pipe[0]);
      close(out_pipe[1]);
    }
    close(status_pipe[0]);
    close(status_pipe[1]);
    throw Error(ErrorCode::kSpawnFailure, std::string("fork: ") + strerror(err));
  }
  if (pid == 0) {
    setpgid(0, 0);
    int devnull = open("/dev/null", O_RDWR);
    if (devnull >= 0) dup2(devnull, STDIN_FILENO);
    if (options.capture_output) {
      dup2(out_pipe[1], STDOUT_FILENO);
      dup2(out_pipe[1], STDERR_FILENO);
    } else if (devnull >= 0) {
      dup2(devnull, STDOUT_FILENO);
      dup2(devnull, STDERR_FILENO);
    }
    if (pin && sched_setaffinity(0, sizeof(cpus), &cpus) != 0)
      WriteRecord(status_pipe[1], kAffinityFailed, errno);
    if (workdir && chdir(workdir) != 0) {
      WriteRecord(status_pipe[1], kChdirFailed, errno);
      _exit(127);
    }
    execvpe(argv[0], argv.data(), envp.data());
    WriteRecord(status_pipe[1], kExecFailed, errno);
    _exit(127);
  }

  // Also set from the parent so the group exists before any kill().
  setpgid(pid, pid);
  close(status_pipe[1]);
  if (options.capture_output) close(out_pipe[1]);

  Child child;
  child.pid = pid;
  child.output_fd = options.capture_output ? out_pipe[0] : -1;
  std::string fatal;
  StatusRecord rec;
  while (true) {
    ssize_t n = read(status_pipe[0], &rec, sizeof(rec));
    if (n < 0 && errno == EINTR) continue;
    if (n != static_cast<ssize_t>(sizeof(rec))) break;
    if (rec.kind == kAffinityFailed) {
      child.warnings.push_back(std::string("cpu affinity not applied: ") +
                               strerror(rec.err));
    } else if (rec.kind == kChdirFailed) {
      fatal = "chdir to '" + options.working_dir + "': " + strerror(rec.err);
    } else {
      fatal = "exec '" + options.argv[0] + "': " + strerror(rec.err);
    }
  }
  close(status_pipe[0]);
  if (!fatal.empty()) {
    Wait(pid);
    if (child.output_fd >= 0) close(child.output_fd);
    throw Error(ErrorCode::kSpawnFailure, fatal);
  }
  return child;
}

int Wait(pid_t pid) {
  int status = 0;
  while (waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) return -1;
  }
  return StatusToCode(status);
}

std::optional<int> TryWait(pid_t pid) {
  int status = 0;
  pid_t r = waitpid(pid, &status, WNOHANG);
  if (r == pid) return StatusToCode(status);
  if (r < 0 && errno != EINTR) return -1;
  return std::nullopt;
}

int Terminate(pid_t pid, std::chrono::milliseconds grace) {
  kill(-pid, SIGTERM);
  const auto deadline = std::chrono::steady_clock::now() + grace;
  while (std::chrono::steady_clock::now() < deadline) {
    if (auto code = TryWait(pid)) {
      kill(-pid, SIGKILL);  // stragglers in the group
      return *code;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  kill(-pid, SIGKILL);
  return Wait(pid);
}

}  // namespace ediag::subprocess

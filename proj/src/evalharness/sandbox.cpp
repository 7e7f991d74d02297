#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vqforge/errors.hpp"
#include "vqforge/evalharness.hpp"

namespace vqforge {

namespace {

constexpr std::size_t kOutputCap = 1 << 20;

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + needle.size())) ++n;
    return n;
}

std::string resolve_executable(const std::string& name) {
    if (name.find('/') != std::string::npos) return name;
    const char* path = std::getenv("PATH");
    std::string dirs = path ? path : "/usr/local/bin:/usr/bin:/bin";
    std::size_t start = 0;
    while (start <= dirs.size()) {
        auto end = dirs.find(':', start);
        if (end == std::string::npos) end = dirs.size();
        std::string dir = dirs.substr(start, end - start);
        if (dir.empty()) dir = ".";
        std::string candidate = dir + "/" + name;
        if (::access(candidate.c_str(), X_OK) == 0) return candidate;
        start = end + 1;
    }
    throw SandboxSpawnFailure("interpreter '" + name + "' not found on PATH");
}

}  // namespace

TaskSpec load_task(const std::filesystem::path& tasks_dir, const std::string& task_id, double default_timeout_s) {
    const auto dir = tasks_dir / task_id;
    TaskSpec spec{task_id, {}};
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_text(dir / "meta.json"));
        auto interpreter = meta.value("interpreter", std::vector<std::string>{"python3"});
        double timeout = meta.value("timeout_s", default_timeout_s);
        if (interpreter.empty()) throw InvalidInput("task " + task_id + ": empty interpreter");
        if (!(timeout > 0)) throw InvalidInput("task " + task_id + ": timeout_s must be positive");
        for (const auto& file : meta.at("tests")) {
            std::filesystem::path name = file.get<std::string>();
            TestScript t{task_id, name.stem().string(), read_text(dir / name), interpreter, timeout};
            if (count_occurrences(t.template_text, kMarker) != 1) {
                throw MarkerMissing("task " + task_id + " test " + t.name + ": marker must occur exactly once");
            }
            spec.tests.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput("task " + task_id + " meta.json: " + e.what());
    }
    if (spec.tests.empty()) throw InvalidInput("task " + task_id + " lists no tests");
    return spec;
}

std::string substitute_marker(const TestScript& script, std::string_view candidate) {
    const std::string& text = script.template_text;
    auto pos = text.find(kMarker);
    if (pos == std::string::npos) throw MarkerMissing("test " + script.name + " has no marker line");
    auto line_begin = text.rfind('\n', pos);
    line_begin = line_begin == std::string::npos ? 0 : line_begin + 1;
    auto line_end = text.find('\n', pos);
    std::string out = text.substr(0, line_begin);
    out += candidate;
    if (candidate.empty() || candidate.back() != '\n') out += '\n';
    if (line_end != std::string::npos) out += text.substr(line_end + 1);
    return out;
}

std::filesystem::path materialize(const TestScript& script, const SourceText& candidate,
                                  const std::filesystem::path& work_root) {
    std::string body = substitute_marker(script, candidate.content());
    std::error_code ec;
    std::filesystem::create_directories(work_root, ec);
    std::string pattern = (work_root / "vqforge-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr) {
        throw IoError("cannot create work directory under " + work_root.string() + ": " + std::strerror(errno));
    }
    auto path = std::filesystem::path(pattern) / (script.name + ".py");
    std::ofstream out(path, std::ios::binary);
    out << body;
    if (!out) throw IoError("cannot write " + path.string());
    return path;
}

RawExecution run_test(const std::filesystem::path& script, const std::vector<std::string>& interpreter,
                      double timeout_s) {
    if (interpreter.empty()) throw SandboxSpawnFailure("empty interpreter command");
    // Everything the child needs is prepared before fork.
    const std::string exe = resolve_executable(interpreter.front());
    std::vector<std::string> args(interpreter.begin(), interpreter.end());
    args.push_back(script.filename().string());
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    const std::string workdir = script.parent_path().string();
    std::vector<std::string> env_strings{"PATH=/usr/local/bin:/usr/bin:/bin", "LANG=C.UTF-8", "HOME=" + workdir,
                                         "PYTHONDONTWRITEBYTECODE=1", "PYTHONHASHSEED=0", "PYTHONIOENCODING=utf-8"};
    std::vector<char*> envp;
    for (auto& e : env_strings) envp.push_back(e.data());
    envp.push_back(nullptr);

    int out_pipe[2];
    int err_pipe[2];
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) throw SandboxSpawnFailure(std::string("pipe: ") + std::strerror(errno));
    if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        throw SandboxSpawnFailure(std::string("pipe: ") + std::strerror(errno));
    }

    auto start = std::chrono::steady_clock::now();
    pid_t pid = ::fork();
    if (pid < 0) {
        for (int fd : {out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) ::close(fd);
        throw SandboxSpawnFailure(std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::dup2(err_pipe[1], STDERR_FILENO);
        if (::chdir(workdir.c_str()) != 0) ::_exit(127);
        ::execve(exe.c_str(), argv.data(), envp.data());
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);

    RawExecution raw;
    const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                      std::chrono::duration<double>(timeout_s));
    pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    std::string* sinks[2] = {&raw.stdout_text, &raw.stderr_text};
    int open_fds = 2;
    char buf[8192];
    while (open_fds > 0) {
        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) {
            raw.timed_out = true;
            break;
        }
        int rc = ::poll(fds, 2, static_cast<int>(std::min<std::int64_t>(remaining.count(), 1000)));
        if (rc < 0 && errno != EINTR) break;
        for (int i = 0; i < 2; ++i) {
            if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            ssize_t n = ::read(fds[i].fd, buf, sizeof buf);
            if (n > 0) {
                if (sinks[i]->size() < kOutputCap) sinks[i]->append(buf, std::min<std::size_t>(n, kOutputCap - sinks[i]->size()));
            } else if (n == 0 || errno != EINTR) {
                ::close(fds[i].fd);
                fds[i].fd = -1;
                --open_fds;
            }
        }
    }

    int status = 0;
    if (raw.timed_out) {
        ::kill(-pid, SIGKILL);
        ::waitpid(pid, &status, 0);
    } else {
        // Pipes closed; the process may still be running if it closed its
        // streams, so keep honoring the deadline.
        for (;;) {
            pid_t w = ::waitpid(pid, &status, WNOHANG);
            if (w == pid) break;
            if (std::chrono::steady_clock::now() >= deadline) {
                raw.timed_out = true;
                ::kill(-pid, SIGKILL);
                ::waitpid(pid, &status, 0);
                break;
            }
            ::usleep(2000);
        }
        ::kill(-pid, SIGKILL);  // stray grandchildren
    }
    for (auto& f : fds) {
        if (f.fd >= 0) ::close(f.fd);
    }
    raw.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (WIFEXITED(status)) {
        raw.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        raw.exit_code = -WTERMSIG(status);
    }
    return raw;
}

}  // namespace vqforge

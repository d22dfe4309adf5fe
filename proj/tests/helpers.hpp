#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "error.hpp"

namespace testutil {

// Errc of the first Error thrown by f, or ok if it returns.
template <typename F>
avar::Errc thrown_code(F&& f) {
    try {
        f();
    } catch (const avar::Error& e) {
        return e.code();
    }
    return avar::Errc::ok;
}

class TempDir {
  public:
    TempDir() {
        std::string tmpl =
            (std::filesystem::temp_directory_path() / "avar-test-XXXXXX").string();
        const char* made = mkdtemp(tmpl.data());
        if (!made) throw std::runtime_error("mkdtemp failed");
        path_ = made;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const {
        return (std::filesystem::path(path_) / name).string();
    }
    const std::string& path() const { return path_; }

  private:
    std::string path_;
};

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

#ifdef AVAR_CLI_PATH
// Runs the installed CLI through /bin/sh, capturing both streams.
// env_prefix is prepended verbatim, e.g. "AVAR_API_KEY=k".
inline CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    const std::string base =
        (std::filesystem::temp_directory_path() /
         ("avar-cli-" + std::to_string(getpid()) + "-" + std::to_string(counter++)))
            .string();
    const std::string out_path = base + ".out";
    const std::string err_path = base + ".err";
    std::string cmd;
    if (!env_prefix.empty()) cmd += env_prefix + " ";
    cmd += std::string(AVAR_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
    const int rc = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = read_text(out_path);
    r.err = read_text(err_path);
    std::filesystem::remove(out_path);
    std::filesystem::remove(err_path);
    return r;
}
#endif

}  // namespace testutil

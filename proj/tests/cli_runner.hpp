#pragma once

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

namespace idoc::testing {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline std::string shell_quote(const std::string& s)
{
    std::string q = "'";
    for (char c : s) {
        q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    }
    return q + "'";
}

inline std::string read_all(const std::filesystem::path& file)
{
    std::ifstream in(file, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Runs the CLI with `args`, capturing stdout and stderr into `scratch`.
/// `env` entries are prefixed as NAME=value assignments.
inline CliResult run_cli(const std::string& binary, const std::vector<std::string>& args,
                         const std::filesystem::path& scratch, const std::map<std::string, std::string>& env = {})
{
    std::filesystem::create_directories(scratch);
    const auto out = scratch / "stdout.txt";
    const auto err = scratch / "stderr.txt";
    std::string cmd = "env -u IDOC_THREADS -u IDOC_SEED -u SOURCE_DATE_EPOCH";
    for (const auto& [k, v] : env) {
        cmd += " " + k + "=" + shell_quote(v);
    }
    cmd += " " + shell_quote(binary);
    for (const std::string& a : args) {
        cmd += " " + shell_quote(a);
    }
    cmd += " >" + shell_quote(out.string()) + " 2>" + shell_quote(err.string());
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_all(out);
    r.err = read_all(err);
    return r;
}

/// Relative path -> bytes for every regular file under `dir`.
inline std::map<std::string, std::string> tree_bytes(const std::filesystem::path& dir)
{
    std::map<std::string, std::string> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) {
            files[std::filesystem::relative(e.path(), dir).string()] = read_all(e.path());
        }
    }
    return files;
}

}  // namespace idoc::testing

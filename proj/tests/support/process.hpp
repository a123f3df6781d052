#pragma once

#include <cstdlib>
#include <string>
#include <sys/wait.h>

namespace testing_support {

// Runs a shell command and returns its exit status (-1 if it did not exit normally).
inline int run_command(const std::string& command) {
    const int status = std::system(command.c_str());
    if (status == -1 || !WIFEXITED(status)) return -1;
    return WEXITSTATUS(status);
}

inline std::string quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

}  // namespace testing_support

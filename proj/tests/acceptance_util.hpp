#pragma once

// Tiny harness for the acceptance binaries: one line per criterion, PASS only
// when the body's checks hold AND the run beat its wall-clock budget.

#include <chrono>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

namespace acceptance {

class Suite {
public:
    struct Check {
        std::string detail;
        bool ok = false;
    };

    // The body receives a Check collector; a thrown exception fails the
    // criterion with the message attached.
    template <class Body>
    void criterion(int id, const std::string& name, double budget_s, Body&& body) {
        std::vector<Check> checks;
        std::string error;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            body(checks);
        } catch (const std::exception& e) {
            error = e.what();
        } catch (...) {
            error = "unknown exception";
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        bool ok = error.empty() && !checks.empty();
        for (const auto& c : checks) ok = ok && c.ok;
        const bool in_budget = elapsed < budget_s;
        ok = ok && in_budget;

        std::printf("criterion %d %s  %s  (%.1f s of %.0f s budget)\n", id, ok ? "PASS" : "FAIL",
                    name.c_str(), elapsed, budget_s);
        if (!error.empty()) std::printf("    error: %s\n", error.c_str());
        for (const auto& c : checks)
            if (!c.ok || verbose_) std::printf("    %s %s\n", c.ok ? "ok  " : "BAD ", c.detail.c_str());
        if (!in_budget) std::printf("    BAD  exceeded wall-clock budget\n");
        std::fflush(stdout);
        if (!ok) failures_ += 1;
    }

    void set_verbose(bool v) { verbose_ = v; }

    int exit_code() const {
        std::printf(failures_ == 0 ? "all criteria passed\n" : "%d criterion(s) FAILED\n", failures_);
        return failures_ == 0 ? 0 : 1;
    }

private:
    int failures_ = 0;
    bool verbose_ = true;
};

inline void check(std::vector<Suite::Check>& checks, bool ok, const std::string& detail) {
    checks.push_back({detail, ok});
}

inline std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

} // namespace acceptance

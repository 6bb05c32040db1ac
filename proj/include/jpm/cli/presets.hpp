// presets.hpp: Named scenarios, each expanding to an explicit configuration

#pragma once

#include <string>
#include <vector>

#include "jpm/errors.hpp"

namespace jpm::cli {

struct Preset {
    std::string name;
    std::string command;       // subcommand the dataset is produced with
    std::string description;
    std::string text;          // configuration layer
};

namespace detail {

struct Rates {
    const char* gamma0 = "0";
    const char* t1_inv = "0";
    const char* t2_inv = "0";
    const char* n_cutoff = "10";
};

inline std::string base_model(const std::string& extra, const Rates& r = {}) {
    return std::string("model.g = 1\nmodel.gamma1 = 1\n") + "model.gamma0 = " + r.gamma0 + "\nmodel.t1_inv = " +
           r.t1_inv + "\nmodel.t2_inv = " + r.t2_inv + "\nmodel.n_cutoff = " + r.n_cutoff +
           "\ntime.units = inv_gamma1\ntime.steps = 400\n" + extra;
}

} // namespace detail

inline const std::vector<Preset>& presets() {
    using detail::base_model;
    static const std::vector<Preset> list = {
        {"fig-bare-chi", "chi", "alpha_j and beta_jk of a bare detector versus time",
         base_model("time.t_max = 40\ninput.kind = fock\ninput.n = 1\nchi.max_index = 4\nchi.max_r = 0\n")},
        {"fig-dephasing-chi", "chi", "bare detector against pure dephasing 1/T2 = 10 gamma1",
         base_model("time.t_max = 40\ninput.kind = fock\ninput.n = 1\nchi.max_index = 4\nchi.max_r = 0\n"
                    "sweep.parameter = model.t2_inv\nsweep.values = 0, 10\n")},
        {"fig-t2-asym", "chi", "long-time beta_jk and settling time as functions of 1/T2",
         base_model("time.t_max = 80\ninput.kind = fock\ninput.n = 1\nchi.max_index = 3\nchi.max_r = 0\n"
                    "sweep.parameter = model.t2_inv\n"
                    "sweep.values = 0, 0.1, 0.2, 0.5, 1, 2, 5, 10, 20, 50, 100\n")},
        {"fig-dephasing-detection-coherent", "simulate", "detection probability, coherent |alpha| = 0.5, with and without dephasing",
         base_model("time.t_max = 40\ninput.kind = coherent\ninput.alpha = 0.5\n"
                    "sweep.parameter = model.t2_inv\nsweep.values = 0, 10\n")},
        {"fig-dephasing-detection-fock", "simulate", "detection probability, one photon, with and without dephasing",
         base_model("time.t_max = 40\ninput.kind = fock\ninput.n = 1\n"
                    "sweep.parameter = model.t2_inv\nsweep.values = 0, 10\n")},
        {"fig-relaxation-chi", "chi", "diagonal chi elements with and without energy relaxation 1/T1 = gamma1",
         base_model("time.t_max = 40\ninput.kind = fock\ninput.n = 1\nchi.max_index = 4\nchi.max_r = 0\n"
                    "sweep.parameter = model.t1_inv\nsweep.values = 0, 1\n")},
        {"fig-relaxation-loss-chi", "chi", "alpha_j^(r): detection after losing r photons, 1/T1 = gamma1",
         base_model("time.t_max = 40\ninput.kind = fock\ninput.n = 1\nchi.max_index = 4\nchi.max_r = 3\n",
                    {.t1_inv = "1"})},
        {"fig-relaxation-detection-coherent", "simulate", "detection probability, coherent |alpha| = 0.5, with and without relaxation",
         base_model("time.t_max = 40\ninput.kind = coherent\ninput.alpha = 0.5\n"
                    "sweep.parameter = model.t1_inv\nsweep.values = 0, 1\n")},
        {"fig-relaxation-detection-fock", "simulate", "detection probability, one photon, with and without relaxation",
         base_model("time.t_max = 40\ninput.kind = fock\ninput.n = 1\n"
                    "sweep.parameter = model.t1_inv\nsweep.values = 0, 1\n")},
        {"fig-t1-asym", "simulate", "asymptotic one-photon detection probability versus 1/T1",
         base_model("time.t_max = 60\ninput.kind = fock\ninput.n = 1\noutput.states = false\n"
                    "sweep.parameter = model.t1_inv\nsweep.values = 0:0.25:3\n")},
        {"fig-dark-fock", "simulate", "one-photon detection with a 5% dark-count rate",
         base_model("time.t_max = 40\ninput.kind = fock\ninput.n = 1\n"
                    "sweep.parameter = model.gamma0\nsweep.values = 0, 0.05\n")},
        {"fig-dark-coherent", "simulate", "coherent alpha = 1 detection with a 5% dark-count rate",
         base_model("time.t_max = 40\ninput.kind = coherent\ninput.alpha = 1\n"
                    "sweep.parameter = model.gamma0\nsweep.values = 0, 0.05\n",
                    {.n_cutoff = "14"})},
        {"fig-low-t2", "simulate", "strong dephasing 1/T2 = 1e4 gamma1 against the rate-equation solution, n = 1, 2",
         base_model("time.t_max = 20000\ninput.kind = fock\ninput.n = 1\noutput.pauli = true\noutput.states = false\n"
                    "sweep.parameter = input.n\nsweep.values = 1, 2\n",
                    {.t2_inv = "10000"})},
        {"fig-mid-t2", "simulate", "intermediate dephasing 1/T2 = gamma1 against the rate-equation solution, n = 1, 2",
         base_model("time.t_max = 40\ninput.kind = fock\ninput.n = 1\noutput.pauli = true\noutput.states = false\n"
                    "sweep.parameter = input.n\nsweep.values = 1, 2\n",
                    {.t2_inv = "1"})},
        {"fig-coherent-bare", "coherent-sweep", "alpha scaling of a bare detector at g t_m = 0.126, 1.26, 2.52, 12.6",
         base_model("time.t_max = 12.6\ninput.kind = coherent\ninput.alpha = 1\ncoherent.t_m = 0.126, 1.26, 2.52, 12.6\n"
                    "coherent.alphas = default\n",
                    {.n_cutoff = "14"})},
        {"fig-coherent-relaxation", "coherent-sweep", "alpha scaling with energy relaxation 1/T1 = gamma1",
         base_model("time.t_max = 12.6\ninput.kind = coherent\ninput.alpha = 1\ncoherent.t_m = 0.126, 1.26, 2.52, 12.6\n"
                    "coherent.alphas = default\n",
                    {.t1_inv = "1", .n_cutoff = "14"})},
        {"fig-coherent-dephasing", "coherent-sweep", "alpha scaling with pure dephasing 1/T2 = 10 gamma1",
         base_model("time.t_max = 12.6\ninput.kind = coherent\ninput.alpha = 1\ncoherent.t_m = 0.126, 1.26, 2.52, 12.6\n"
                    "coherent.alphas = default\n",
                    {.t2_inv = "10", .n_cutoff = "14"})},
    };
    return list;
}

inline const Preset& find_preset(const std::string& name) {
    for (const auto& p : presets()) {
        if (p.name == name) return p;
    }
    throw ConfigError("unknown preset '" + name + "' (see list-presets)", "scenario.preset");
}

} // namespace jpm::cli

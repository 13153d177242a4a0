#include "neurocal/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "neurocal/errors.hpp"

namespace neurocal {

using nlohmann::json;

namespace {

std::string fmt17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows; ++i) {
    json r = json::array();
    for (int j = 0; j < m.cols; ++j) r.push_back(m.at(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Mat mat_from_json(const json& j) {
  Mat m;
  m.rows = static_cast<int>(j.size());
  m.cols = m.rows ? static_cast<int>(j[0].size()) : 0;
  m.v.reserve(static_cast<size_t>(m.rows) * m.cols);
  for (const auto& row : j) {
    if (static_cast<int>(row.size()) != m.cols)
      throw Error("bad-json", "ragged matrix");
    for (const auto& x : row) m.v.push_back(x.get<double>());
  }
  return m;
}

}  // namespace

std::string network_to_json(const NetworkSpec& spec) {
  json j;
  j["units"] = {{"time", "s"}, {"calcium", "uM"}, {"rate", "Hz"}, {"weights", "dimensionless"}};
  j["grid"] = {{"dt_sim_s", spec.grid.dt_sim},
               {"dt_frame_s", spec.grid.dt_frame},
               {"duration_s", spec.grid.duration}};
  j["kinetics"] = {{"tau_h_s", spec.kinetics.tau_h}, {"sigma_h", spec.kinetics.sigma_h}};
  j["w"] = mat_to_json(spec.w);
  if (!spec.tau_syn.empty()) j["tau_syn_s"] = mat_to_json(spec.tau_syn);
  json neurons = json::array();
  for (const auto& p : spec.neurons) {
    neurons.push_back({{"b", p.b},
                       {"C_b_uM", p.c_b},
                       {"tau_c_s", p.tau_c},
                       {"A_uM", p.a_jump},
                       {"sigma_c", p.sigma_c},
                       {"alpha", p.alpha},
                       {"beta", p.beta},
                       {"gamma", p.gamma},
                       {"sigma_F", p.sigma_f},
                       {"K_d_uM", p.k_d},
                       {"k", p.k}});
  }
  j["neurons"] = std::move(neurons);
  return j.dump(2);
}

NetworkSpec network_from_json(const std::string& text) {
  json j = json::parse(text);
  NetworkSpec spec;
  spec.grid = make_grid(j["grid"]["dt_sim_s"].get<double>(),
                        j["grid"]["dt_frame_s"].get<double>(),
                        j["grid"]["duration_s"].get<double>());
  spec.kinetics.tau_h = j["kinetics"]["tau_h_s"].get<double>();
  spec.kinetics.sigma_h = j["kinetics"]["sigma_h"].get<double>();
  spec.w = mat_from_json(j["w"]);
  if (j.contains("tau_syn_s")) spec.tau_syn = mat_from_json(j["tau_syn_s"]);
  for (const auto& nj : j["neurons"]) {
    NeuronIntrinsics p;
    p.b = nj["b"].get<double>();
    p.c_b = nj["C_b_uM"].get<double>();
    p.tau_c = nj["tau_c_s"].get<double>();
    p.a_jump = nj["A_uM"].get<double>();
    p.sigma_c = nj["sigma_c"].get<double>();
    p.alpha = nj["alpha"].get<double>();
    p.beta = nj["beta"].get<double>();
    p.gamma = nj["gamma"].get<double>();
    p.sigma_f = nj["sigma_F"].get<double>();
    p.k_d = nj["K_d_uM"].get<double>();
    p.k = nj["k"].get<std::vector<double>>();
    spec.neurons.push_back(std::move(p));
  }
  return spec;
}

void write_network_json(const NetworkSpec& spec, const std::string& path) {
  write_text_file(path, network_to_json(spec));
}

NetworkSpec read_network_json(const std::string& path) {
  return network_from_json(read_text_file(path));
}

void write_matrix_csv(const Mat& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("io", "cannot open " + path);
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) {
      if (j) f << ',';
      f << fmt17(m.at(i, j));
    }
    f << '\n';
  }
}

Mat read_matrix_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("io", "cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  Mat m;
  m.rows = static_cast<int>(rows.size());
  m.cols = m.rows ? static_cast<int>(rows[0].size()) : 0;
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != m.cols) throw Error("io", "ragged csv " + path);
    m.v.insert(m.v.end(), r.begin(), r.end());
  }
  return m;
}

void write_timeseries_csv(const Mat& series, const TimeGrid& grid,
                          const std::string& col_prefix, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("io", "cannot open " + path);
  f << "time_s";
  for (int i = 0; i < series.rows; ++i) f << ',' << col_prefix << i;
  f << '\n';
  for (int t = 0; t < series.cols; ++t) {
    f << fmt17(grid.frame_time(t));
    for (int i = 0; i < series.rows; ++i) f << ',' << fmt17(series.at(i, t));
    f << '\n';
  }
}

Mat read_timeseries_csv(const std::string& path, std::vector<double>* times) {
  Mat raw = [&] {
    std::ifstream f(path);
    if (!f) throw Error("io", "cannot open " + path);
    std::string header;
    std::getline(f, header);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      std::vector<double> row;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
      rows.push_back(std::move(row));
    }
    Mat m;
    m.rows = static_cast<int>(rows.size());
    m.cols = m.rows ? static_cast<int>(rows[0].size()) : 0;
    for (const auto& r : rows) m.v.insert(m.v.end(), r.begin(), r.end());
    return m;
  }();
  // transpose, dropping the time column
  int n_frames = raw.rows, n = raw.cols - 1;
  Mat out(n, n_frames);
  if (times) times->resize(n_frames);
  for (int t = 0; t < n_frames; ++t) {
    if (times) (*times)[t] = raw.at(t, 0);
    for (int i = 0; i < n; ++i) out.at(i, t) = raw.at(t, i + 1);
  }
  return out;
}

void write_spikes_csv(const std::vector<std::vector<int>>& spike_steps,
                      double dt, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("io", "cannot open " + path);
  f << "neuron,time_s\n";
  for (size_t i = 0; i < spike_steps.size(); ++i)
    for (int t : spike_steps[i]) f << i << ',' << fmt17((t + 1) * dt) << '\n';
}

std::vector<std::vector<int>> read_spikes_csv(const std::string& path, double dt,
                                              int n_neurons) {
  std::ifstream f(path);
  if (!f) throw Error("io", "cannot open " + path);
  std::vector<std::vector<int>> out(n_neurons);
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    int i = std::stoi(line.substr(0, comma));
    double ts = std::stod(line.substr(comma + 1));
    if (i < 0 || i >= n_neurons) throw Error("io", "neuron index out of range");
    out[i].push_back(static_cast<int>(std::llround(ts / dt)) - 1);
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("io", "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error("io", "cannot open " + path);
  f << text;
}

}  // namespace neurocal

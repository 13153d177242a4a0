#pragma once

#include <string>
#include <vector>

#include "neurocal/types.hpp"

namespace neurocal {

// NetworkSpec <-> single JSON document (units stated inline).
std::string network_to_json(const NetworkSpec& spec);
NetworkSpec network_from_json(const std::string& text);
void write_network_json(const NetworkSpec& spec, const std::string& path);
NetworkSpec read_network_json(const std::string& path);

// Matrices: n rows x m cols CSV, no header, round-trip exact.
void write_matrix_csv(const Mat& m, const std::string& path);
Mat read_matrix_csv(const std::string& path);

// Time series: header row, first column = time in seconds.
void write_timeseries_csv(const Mat& series, const TimeGrid& grid,
                          const std::string& col_prefix, const std::string& path);
// Reads back dropping the time column; returns series as n x n_frames.
Mat read_timeseries_csv(const std::string& path, std::vector<double>* times = nullptr);

// Sparse spike raster: one row per spike, columns neuron,time_s.
void write_spikes_csv(const std::vector<std::vector<int>>& spike_steps,
                      double dt, const std::string& path);
std::vector<std::vector<int>> read_spikes_csv(const std::string& path, double dt,
                                              int n_neurons);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace neurocal

fn main() {
    graph_calib::cli::init_logging();
    std::process::exit(graph_calib::cli::main_with_args(std::env::args_os()));
}

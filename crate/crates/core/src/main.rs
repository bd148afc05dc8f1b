fn main() {
    std::process::exit(lockfree_latency::cli::dispatch(std::env::args_os()));
}

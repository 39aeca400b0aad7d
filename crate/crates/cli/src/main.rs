fn main() {
    std::process::exit(v2i_bench::main_with(std::env::args_os()));
}

use std::process::ExitCode;

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("FLOWSHIFT_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: FLOWSHIFT_THREADS must be a positive integer");
                return ExitCode::from(1);
            }
        }
    }
    ExitCode::from(flowshift::cli::run(std::env::args_os()) as u8)
}

//! The `armoury` command line. Every command prints a reproducibility
//! header on stderr; exit status is 0 on success, 1 on bad data and 2 on
//! bad usage.

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use armoury_core::altgen::{hash_chain, HashChainSpec, HashId, Lcg, LcgPreset};
use armoury_core::asm::assemble;
use armoury_core::entropy::sliding_profile;
use armoury_core::ir::{BytecodeInstr, GenerationProfile, Register};
use armoury_core::mutation::{count_variant_sizes, count_variants, mutate_blob, PoolSet};
use armoury_core::packer::{protect_program, reveal_program, DecodeOracle, LiveSearch, LocalOracle};
use armoury_core::vm::execute;
use armoury_core::{sco, Chunk, CipherKey, CipherSpec, KeyPool, PackMode, ProtectedBlob, Slice};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::formats::{self, load_blob, load_manifest, load_spec, parse_u64, FormatError};
use crate::oracle::{
    self, connect_socket, spawn_loopback, ClientError, FifoDuplex, OracleClient, OracleConfig,
    SocketAddr, SocketListener, Transport,
};
use crate::pipeline::{build_pools, choose_profile, encode_program, PipelineError};
use crate::search::{run_search, Method, SearchPlan};

/// Key length above which `--method pairs` over a whole space needs
/// `--i-have-hours`.
const LONG_SEARCH_BITS: u32 = 40;
/// Guesses one pairs run may examine without the acknowledgement: a 1/4096
/// slice at full width.
const PAIRS_GUESS_BUDGET: u64 = 1 << 24;

#[derive(Parser, Debug)]
#[command(name = "armoury", version, about = "Keyed bytecode protection with a split decode oracle")]
struct Cli {
    /// Seed for every random choice; printed in the header.
    #[arg(long, global = true, env = "ARMOURY_SEED", value_parser = seed_arg)]
    seed: Option<u64>,
    /// Machine-readable output for analysis commands.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct SpecArgs {
    /// Built-in cipher: default-59, scaled-579 or scaled-234.
    #[arg(long, default_value = "default-59")]
    spec: String,
    /// Cipher description file, one `degree:tap,tap,...` line per register.
    #[arg(long)]
    spec_file: Option<PathBuf>,
}

impl SpecArgs {
    fn load(&self) -> Result<CipherSpec, CliError> {
        Ok(load_spec(&self.spec, self.spec_file.as_deref())?)
    }
}

#[derive(Args, Debug, Clone)]
struct OracleArgs {
    /// Where keys are decoded: local, loopback, pipe or socket.
    #[arg(long, default_value = "local")]
    oracle: String,
    /// FIFO base path, socket path or TCP port of a remote oracle.
    #[arg(long)]
    addr: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Toy assembly to a bytecode dump.
    Assemble {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Generation profile seed; defaults to the run seed.
        #[arg(long, value_parser = seed_arg)]
        profile_seed: Option<u64>,
        /// Redraw the profile until every concatenated chunk has this many keys.
        #[arg(long)]
        min_pool: Option<usize>,
        #[arg(long, default_value_t = 64)]
        attempts: u64,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Every key that encrypts to one chunk, as a pool file.
    SearchKeys {
        #[arg(long, value_parser = seed_arg)]
        target: u64,
        #[command(flatten)]
        spec: SpecArgs,
        /// Search only part `i` of `n` of the guess space.
        #[arg(long)]
        slice: Option<String>,
        #[arg(long, default_value = "r1")]
        method: String,
        /// Acknowledge a search that runs for hours.
        #[arg(long)]
        i_have_hours: bool,
        /// Directory of finished pieces; reruns resume from it.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Pieces the slice is split into for threads and checkpoints.
        #[arg(long, default_value_t = 64)]
        pieces: u64,
        /// Keep at most this many keys, chosen uniformly with the run seed.
        #[arg(long)]
        max_keys: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Pools for every chunk of a bytecode dump, with a manifest.
    BuildPools {
        input: PathBuf,
        #[arg(long, default_value = "concat")]
        mode: String,
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 4096)]
        max_keys: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Replace every chunk of a bytecode dump by a key.
    Protect {
        input: PathBuf,
        #[arg(long, default_value = "concat")]
        mode: String,
        #[command(flatten)]
        spec: SpecArgs,
        /// Pool manifest; without it pools are searched on demand.
        #[arg(long)]
        pools: Option<PathBuf>,
        #[arg(long, default_value_t = 4096)]
        max_keys: usize,
        /// Also write the pools used, one per position, with a manifest.
        #[arg(long)]
        pools_out: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Blob back to a bytecode dump through an oracle.
    Reveal {
        input: PathBuf,
        #[command(flatten)]
        oracle: OracleArgs,
        #[arg(long)]
        spec_file: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Execute a blob (revealed through an oracle) or a bytecode dump.
    Run {
        input: PathBuf,
        #[arg(long, value_parser = seed_arg)]
        profile_seed: u64,
        #[command(flatten)]
        oracle: OracleArgs,
        #[arg(long)]
        spec_file: Option<PathBuf>,
        #[arg(long, default_value_t = 1_000_000)]
        fuel: u64,
    },
    /// Resample every key of a blob from its pools.
    Mutate {
        input: PathBuf,
        /// Pool manifest; without it keys come from the oracle's MUTATE.
        #[arg(long)]
        pools: Option<PathBuf>,
        #[command(flatten)]
        oracle: OracleArgs,
        #[arg(long)]
        spec_file: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Sliding-window byte entropy as `offset,entropy` CSV.
    Entropy {
        input: PathBuf,
        #[arg(long, default_value_t = armoury_core::entropy::DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = armoury_core::entropy::DEFAULT_STRIDE)]
        stride: usize,
    },
    /// Size of a variant space: product of pool sizes.
    CountVariants {
        /// Comma-separated pool sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<u64>>,
        #[arg(long)]
        pools: Option<PathBuf>,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// The decode oracle.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
    /// Outputs of a linear congruential preset.
    Lcg {
        #[arg(long)]
        preset: String,
        /// Initial state; defaults to the run seed.
        #[arg(long, value_parser = seed_arg)]
        state: Option<u64>,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Elements of an iterated hash chain.
    Hashchain {
        #[arg(long, default_value = "sha256")]
        hash: String,
        #[arg(long, default_value_t = 64)]
        m_bytes: usize,
        #[arg(long, default_value_t = 128)]
        n_bits: u32,
        /// IV as hex; zero bytes when absent.
        #[arg(long)]
        iv: Option<String>,
        /// First data block as hex.
        #[arg(long, default_value = "")]
        d0: String,
        #[arg(long, default_value_t = 4)]
        count: usize,
    },
}

#[derive(Subcommand, Debug)]
enum OracleCommand {
    /// Answer DECODE and MUTATE frames. The loopback transport speaks on
    /// stdin and stdout.
    Serve {
        #[arg(long, default_value = "socket")]
        transport: String,
        #[arg(long)]
        addr: Option<String>,
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        pools: Option<PathBuf>,
        /// Stop after this many connections.
        #[arg(long)]
        connections: Option<u64>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_error!(
    FormatError,
    PipelineError,
    ClientError,
    io::Error,
    armoury_core::packer::PackError,
    armoury_core::mutation::MutationError,
    armoury_core::entropy::EntropyError,
    armoury_core::altgen::HashChainError,
    armoury_core::vm::VmError,
    armoury_core::asm::AsmError,
    armoury_core::cipher::SpecError
);

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn seed_arg(s: &str) -> Result<u64, String> {
    parse_u64(s).ok_or_else(|| format!("not a number: {s:?}"))
}

fn mode_arg(s: &str) -> Result<PackMode, CliError> {
    match s {
        "concat" => Ok(PackMode::Concat),
        "direct" => Ok(PackMode::Direct),
        _ => Err(usage(format!("unknown mode {s:?} (concat, direct)"))),
    }
}

fn parse_slice(s: &str) -> Result<Slice, CliError> {
    let bad = || usage(format!("slice must look like i/n with i < n, got {s:?}"));
    let (i, n) = s.split_once('/').ok_or_else(bad)?;
    let (i, n) = (i.trim().parse().map_err(|_| bad())?, n.trim().parse().map_err(|_| bad())?);
    Slice::new(i, n).map_err(|_| bad())
}

fn hex_bytes(s: &str) -> Result<Vec<u8>, CliError> {
    let s = s.strip_prefix("0x").unwrap_or(s);
    if s.len() % 2 != 0 {
        return Err(usage("hex string needs an even number of digits"));
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).map_err(|_| usage(format!("bad hex {s:?}"))))
        .collect()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02X}")).collect()
}

/// Decoding through the cipher itself or through a remote oracle.
enum Decoder {
    Local(LocalOracle),
    Remote(OracleClient<Box<dyn oracle::Channel>>),
}

impl DecodeOracle for Decoder {
    type Error = ClientError;

    fn decode(&mut self, key: CipherKey) -> Result<Chunk, ClientError> {
        match self {
            Decoder::Local(o) => Ok(o.decode(key).unwrap()),
            Decoder::Remote(c) => c.decode(key),
        }
    }
}

fn connect(args: &OracleArgs, spec: &CipherSpec) -> Result<Decoder, CliError> {
    let transport = match args.oracle.as_str() {
        "local" => return Ok(Decoder::Local(LocalOracle(*spec))),
        other => other.parse::<Transport>().map_err(usage)?,
    };
    let addr = || args.addr.clone().ok_or_else(|| usage("--addr is required for a remote oracle"));
    let channel: Box<dyn oracle::Channel> = match transport {
        Transport::Loopback => {
            Box::new(spawn_loopback(&OracleConfig::new(*spec, PoolSet::default(), 0)))
        }
        Transport::Pipe => Box::new(FifoDuplex::connect(Path::new(&addr()?))?),
        Transport::Socket => connect_socket(&SocketAddr::parse(&addr()?))?,
    };
    Ok(Decoder::Remote(OracleClient::new(channel)))
}

/// The blob's own spec, or a spec file that must carry the same id.
fn blob_spec(blob: &ProtectedBlob, spec_file: Option<&Path>) -> Result<CipherSpec, CliError> {
    let spec = load_spec(&blob.spec_id, spec_file)?;
    if spec.id() != blob.spec_id {
        return Err(CliError::Data(format!("blob is for spec {}, not {}", blob.spec_id, spec.id())));
    }
    Ok(spec)
}

struct Ctx<'a> {
    seed: u64,
    json: bool,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn header(&mut self, command: &str, spec: Option<&str>) -> io::Result<()> {
        writeln!(
            self.err,
            "# armoury {} (core {}) command={command} seed=0x{:016X} spec={}",
            env!("CARGO_PKG_VERSION"),
            armoury_core::VERSION,
            self.seed,
            spec.unwrap_or("-")
        )
    }

    fn emit_text(&mut self, path: Option<&Path>, text: &str) -> Result<(), CliError> {
        match path {
            Some(p) => formats::write_file(p, text.as_bytes())?,
            None => self.out.write_all(text.as_bytes())?,
        }
        Ok(())
    }

    fn note(&mut self, msg: impl std::fmt::Display) -> io::Result<()> {
        writeln!(self.err, "# {msg}")
    }
}

/// Runs one command line; returns the exit status.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let seed = cli.seed.unwrap_or_else(rand::random);
    let mut ctx = Ctx { seed, json: cli.json, out, err };
    match dispatch(cli.command, &mut ctx) {
        Ok(()) => 0,
        Err(e) => {
            let (kind, msg) = match &e {
                CliError::Usage(m) => ("usage", m),
                CliError::Data(m) => ("error", m),
            };
            let _ = writeln!(ctx.err, "armoury: {kind}: {msg}");
            e.code()
        }
    }
}

fn dispatch(command: Command, ctx: &mut Ctx) -> Result<(), CliError> {
    match command {
        Command::Assemble { input, output, profile_seed, min_pool, attempts, spec } => {
            let spec = spec.load()?;
            ctx.header("assemble", Some(&spec.id()))?;
            let source = formats::read_text(&input)?;
            let start = profile_seed.unwrap_or(ctx.seed);
            let (profile_seed, words) = match min_pool {
                Some(min) => {
                    // a cap of `min` keeps memory flat and still answers the size test
                    let mut search = LiveSearch::new(spec)?.with_max_keys(min, 0);
                    choose_profile(&source, &spec, min, start, attempts, &mut search)?
                }
                None => (start, encode_program(&assemble(&source)?, &GenerationProfile::new(start))),
            };
            ctx.note(format_args!("profile-seed=0x{profile_seed:016X}"))?;
            ctx.emit_text(output.as_deref(), &formats::dump_words(&words))
        }
        Command::SearchKeys {
            target,
            spec,
            slice,
            method,
            i_have_hours,
            checkpoint,
            pieces,
            max_keys,
            output,
        } => {
            let spec = spec.load()?;
            ctx.header("search-keys", Some(&spec.id()))?;
            let method: Method = method.parse().map_err(usage)?;
            let slice = slice.as_deref().map(parse_slice).transpose()?.unwrap_or(Slice::FULL);
            if target >> spec.chunk_bits() != 0 {
                return Err(usage(format!("target 0x{target:X} is wider than {} bits", spec.chunk_bits())));
            }
            if pieces == 0 {
                return Err(usage("--pieces must be positive"));
            }
            let guesses = method.guess_space(&spec) / slice.total();
            if method == Method::Pairs
                && spec.key_bits() > LONG_SEARCH_BITS
                && guesses > PAIRS_GUESS_BUDGET
                && !i_have_hours
            {
                return Err(usage(format!(
                    "{guesses} pair guesses take hours; pass --i-have-hours, use a smaller --slice, or --method r1"
                )));
            }
            let started = Instant::now();
            let plan = SearchPlan { target: Chunk(target), spec, method, slice, pieces, checkpoint };
            let (mut pool, resumed) = run_search(&plan)?;
            let found = pool.len();
            if let Some(max) = max_keys {
                pool = pool.subsample(max, ctx.seed);
            }
            ctx.note(format_args!(
                "{found} keys in slice {}/{} ({resumed} pieces resumed) in {:.2?}",
                slice.index(),
                slice.total(),
                started.elapsed()
            ))?;
            let text = formats::pool_to_string(&pool, &spec);
            if ctx.json {
                let keys: Vec<String> = pool.keys().iter().map(|k| format!("0x{:015X}", k.0)).collect();
                let doc = json!({
                    "spec": spec.id(), "target": format!("0x{target:015X}"), "found": found,
                    "slice": [slice.index(), slice.total()], "resumed": resumed, "keys": keys,
                });
                if let Some(p) = &output {
                    formats::write_file(p, text.as_bytes())?;
                }
                writeln!(ctx.out, "{doc}")?;
                Ok(())
            } else {
                ctx.emit_text(output.as_deref(), &text)
            }
        }
        Command::BuildPools { input, mode, spec, max_keys, out_dir } => {
            let spec = spec.load()?;
            ctx.header("build-pools", Some(&spec.id()))?;
            let words = formats::parse_dump(&formats::read_text(&input)?)?;
            let pools = build_pools(&words, mode_arg(&mode)?, &spec, max_keys, ctx.seed)?;
            if let Some(i) = pools.iter().position(KeyPool::is_empty) {
                return Err(CliError::Data(format!("chunk {i} ({}) has no key", pools[i].target)));
            }
            let manifest = formats::write_pool_dir(&out_dir, &pools, &spec)?;
            ctx.note(format_args!("{} pools, manifest {}", pools.len(), manifest.display()))?;
            Ok(())
        }
        Command::Protect { input, mode, spec, pools, max_keys, pools_out, output } => {
            let spec = spec.load()?;
            ctx.header("protect", Some(&spec.id()))?;
            let mode = mode_arg(&mode)?;
            let words = formats::parse_dump(&formats::read_text(&input)?)?;
            let (blob, used) = match pools {
                Some(manifest) => {
                    let mut set = load_manifest(&manifest, &spec, false)?;
                    let blob = protect_program(&words, mode, &spec, &mut set, ctx.seed)?;
                    (blob, set.pools().to_vec())
                }
                None => {
                    let mut live = LiveSearch::new(spec)?.with_max_keys(max_keys, ctx.seed);
                    let blob = protect_program(&words, mode, &spec, &mut live, ctx.seed)?;
                    let used = blob
                        .keys
                        .iter()
                        .map(|&k| live.pool(sco(CipherKey(k), &spec)).clone())
                        .collect();
                    (blob, used)
                }
            };
            formats::write_file(&output, &blob.to_bytes())?;
            if let Some(dir) = pools_out {
                formats::write_pool_dir(&dir, &used, &spec)?;
            }
            ctx.note(format_args!("{} keys, {:?} mode", blob.keys.len(), blob.mode))?;
            Ok(())
        }
        Command::Reveal { input, oracle, spec_file, output } => {
            let blob = load_blob(&input)?;
            ctx.header("reveal", Some(&blob.spec_id))?;
            let spec = blob_spec(&blob, spec_file.as_deref())?;
            let mut decoder = connect(&oracle, &spec)?;
            let words = reveal_program(&blob, &mut decoder).map_err(|e| CliError::Data(e.to_string()))?;
            ctx.emit_text(output.as_deref(), &formats::dump_words(&words))
        }
        Command::Run { input, profile_seed, oracle, spec_file, fuel } => {
            let bytes = formats::read_file(&input)?;
            let words = if bytes.starts_with(armoury_core::packer::BLOB_MAGIC) {
                let blob = ProtectedBlob::from_bytes(&bytes)?;
                ctx.header("run", Some(&blob.spec_id))?;
                let spec = blob_spec(&blob, spec_file.as_deref())?;
                let mut decoder = connect(&oracle, &spec)?;
                reveal_program(&blob, &mut decoder).map_err(|e| CliError::Data(e.to_string()))?
            } else {
                ctx.header("run", None)?;
                let text = String::from_utf8(bytes).map_err(|_| CliError::Data("input is neither blob nor dump".into()))?;
                formats::parse_dump(&text)?
            };
            let profile = GenerationProfile::new(profile_seed);
            let program: Vec<BytecodeInstr> =
                words.chunks_exact(5).map(|c| BytecodeInstr(c.try_into().unwrap())).collect();
            let vm = execute(&program, &profile, fuel)?;
            let regs = vm.registers(&profile);
            if ctx.json {
                let doc = json!({
                    "registers": Register::ALL.iter().zip(regs).map(|(r, v)| (r.name().to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
                    "pc": vm.pc, "zero_flag": vm.zero_flag,
                });
                writeln!(ctx.out, "{doc}")?;
            } else {
                for (r, v) in Register::ALL.iter().zip(regs) {
                    write!(ctx.out, "{}=0x{v:08X} ", r.name())?;
                }
                writeln!(ctx.out, "PC={} ZF={}", vm.pc, vm.zero_flag as u8)?;
            }
            Ok(())
        }
        Command::Mutate { input, pools, oracle, spec_file, output } => {
            let blob = load_blob(&input)?;
            ctx.header("mutate", Some(&blob.spec_id))?;
            let spec = blob_spec(&blob, spec_file.as_deref())?;
            let mutated = match pools {
                Some(manifest) => mutate_blob(&blob, &load_manifest(&manifest, &spec, false)?, &spec, ctx.seed)?,
                None => {
                    let Decoder::Remote(mut client) = connect(&oracle, &spec)? else {
                        return Err(usage("mutate needs --pools or a remote --oracle"));
                    };
                    let keys = (0..blob.keys.len() as u32)
                        .map(|i| client.mutate(i).map(|k| k.0))
                        .collect::<Result<_, _>>()?;
                    ProtectedBlob { keys, ..blob }
                }
            };
            formats::write_file(&output, &mutated.to_bytes())?;
            Ok(())
        }
        Command::Entropy { input, window, stride } => {
            ctx.header("entropy", None)?;
            let data = formats::read_file(&input)?;
            let profile = sliding_profile(&data, window, stride)?;
            if ctx.json {
                let points: Vec<_> = profile.points().map(|(o, h)| json!([o, h])).collect();
                writeln!(ctx.out, "{}", json!({"window": window, "stride": stride, "points": points}))?;
            } else {
                writeln!(ctx.out, "offset,entropy")?;
                for (offset, h) in profile.points() {
                    writeln!(ctx.out, "{offset},{h:.6}")?;
                }
            }
            Ok(())
        }
        Command::CountVariants { sizes, pools, spec } => {
            let count = match (sizes, pools) {
                (Some(sizes), None) => {
                    ctx.header("count-variants", None)?;
                    count_variant_sizes(&sizes)?
                }
                (None, Some(manifest)) => {
                    let spec = spec.load()?;
                    ctx.header("count-variants", Some(&spec.id()))?;
                    count_variants(&load_manifest(&manifest, &spec, false)?)?
                }
                _ => return Err(usage("give exactly one of --sizes and --pools")),
            };
            if ctx.json {
                writeln!(ctx.out, "{}", json!({"exact": count.exact.to_string(), "log2": count.log2}))?;
            } else {
                writeln!(ctx.out, "{} (log2 {:.4})", count.exact, count.log2)?;
            }
            Ok(())
        }
        Command::Oracle { command: OracleCommand::Serve { transport, addr, spec, pools, connections } } => {
            let spec = spec.load()?;
            ctx.header("oracle serve", Some(&spec.id()))?;
            let pools = match pools {
                Some(m) => load_manifest(&m, &spec, false)?,
                None => PoolSet::default(),
            };
            let config = OracleConfig::new(spec, pools, ctx.seed);
            let addr = || addr.clone().ok_or_else(|| usage("--addr is required for this transport"));
            match transport.parse::<Transport>().map_err(usage)? {
                Transport::Loopback => {
                    let mut stdio = Stdio { input: io::stdin().lock(), output: io::stdout().lock() };
                    oracle::serve(&mut stdio, &mut config.state(0))?;
                }
                Transport::Pipe => oracle::serve_pipe(Path::new(&addr()?), &config, connections)?,
                Transport::Socket => {
                    let listener = SocketListener::bind(&SocketAddr::parse(&addr()?))?;
                    if let Some(port) = listener.port() {
                        ctx.note(format_args!("listening on 127.0.0.1:{port}"))?;
                    }
                    ctx.err.flush()?;
                    listener.serve(&config, connections)?;
                }
            }
            Ok(())
        }
        Command::Lcg { preset, state, count } => {
            ctx.header("lcg", None)?;
            let preset = LcgPreset::from_name(&preset).ok_or_else(|| {
                let names: Vec<_> = LcgPreset::ALL.iter().map(|p| p.name()).collect();
                usage(format!("unknown preset {preset:?} ({})", names.join(", ")))
            })?;
            let values: Vec<u64> = Lcg::new(preset.params(), state.unwrap_or(ctx.seed)).take(count).collect();
            if ctx.json {
                writeln!(ctx.out, "{}", json!({"preset": preset.name(), "values": values}))?;
            } else {
                for v in values {
                    writeln!(ctx.out, "0x{v:X}")?;
                }
            }
            Ok(())
        }
        Command::Hashchain { hash, m_bytes, n_bits, iv, d0, count } => {
            ctx.header("hashchain", None)?;
            let hash = match hash.as_str() {
                "sha256" => HashId::Sha256,
                "toy" => HashId::Toy,
                _ => return Err(usage(format!("unknown hash {hash:?} (sha256, toy)"))),
            };
            let iv = match iv {
                Some(h) => hex_bytes(&h)?,
                None => vec![0; m_bytes],
            };
            let spec = HashChainSpec { hash, m_bytes, n_bits, iv, padding_seed: ctx.seed };
            let mut chain = hash_chain(&spec, &hex_bytes(&d0)?)?;
            let values: Vec<String> = chain.by_ref().take(count).map(|v| hex(&v)).collect();
            if chain.capped() {
                ctx.note("iteration count capped")?;
            }
            if ctx.json {
                writeln!(ctx.out, "{}", json!({"values": values}))?;
            } else {
                for v in values {
                    writeln!(ctx.out, "0x{v}")?;
                }
            }
            Ok(())
        }
    }
}

struct Stdio<R, W> {
    input: R,
    output: W,
}

impl<R: io::Read, W> io::Read for Stdio<R, W> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        self.input.read(buf)
    }
}

impl<R, W: Write> Write for Stdio<R, W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.output.write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.output.flush()
    }
}

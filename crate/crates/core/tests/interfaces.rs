//! The files a trainer consumes and produces: vocabulary, epoch JSONL, prompt file, rollouts.

use std::collections::HashSet;
use std::fs;
use std::io::BufReader;

use dualtrace::corpus::{build_dataset, materialize_epoch, write_jsonl, write_prompt_file, EnvConfig, RawExample};
use dualtrace::dropping::DropPolicy;
use dualtrace::eval::{evaluate, read_rollouts, validate_plan};
use dualtrace::grid::{MazeParams, TaskKind};
use dualtrace::tokenize::{decode_prompt, decode_response, ControlMode, Token, TokenSeq, Vocab};

fn maze5() -> EnvConfig {
    EnvConfig::Maze(MazeParams::new(5, 0.3, 0.5))
}

#[test]
fn vocabulary_file_layout() {
    let vocab = maze5().vocab();
    let mut buf = Vec::new();
    vocab.write_to(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    let names: Vec<&str> = text.lines().collect();
    assert_eq!(
        &names[..11],
        ["bos", "eos", "start", "goal", "wall", "plan", "create", "close", "worker", "box", "dock"]
    );
    assert_eq!(&names[11..16], ["0", "1", "2", "3", "4"]);
    assert_eq!(names[16], "c0");
    assert_eq!(*names.last().unwrap(), "c50");
    assert_eq!(names.len(), vocab.len());
    assert_eq!(Vocab::read_from(BufReader::new(buf.as_slice())).unwrap(), vocab);
    // Every token of every epoch line maps to an id.
    let data = build_dataset(20, &maze5(), 1).unwrap();
    let epoch = materialize_epoch(&data, &DropPolicy::preset("maze-default").unwrap(), &vocab, 1, 0).unwrap();
    for ex in &epoch {
        let ids = vocab.encode_ids(&ex.target).unwrap();
        assert!(ids.iter().all(|&i| (i as usize) < vocab.len()));
        assert_eq!(vocab.token(ids[0]), Some(Token::Bos));
    }
    assert_eq!(Vocab::default(), Vocab::for_maze(30));
    assert_eq!(Vocab::for_sokoban().numerals(), 7);
    assert_eq!(Vocab::for_sokoban().max_cost(), 196);
}

#[test]
fn epoch_lines_decode_and_validate() {
    for env in [maze5(), EnvConfig::Sokoban] {
        let data = build_dataset(30, &env, 2).unwrap();
        let vocab = env.vocab();
        let policy =
            DropPolicy::preset(if env.kind() == TaskKind::Maze { "maze-default" } else { "sokoban-default" }).unwrap();
        let epoch = materialize_epoch(&data, &policy, &vocab, 2, 4).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&epoch, &mut buf).unwrap();
        for (line, ex) in String::from_utf8(buf).unwrap().lines().zip(&data) {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let keys: HashSet<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
            assert_eq!(keys, HashSet::from(["id", "input", "target", "level"]));
            let input: TokenSeq = v["input"].as_str().unwrap().parse().unwrap();
            let target: TokenSeq = v["target"].as_str().unwrap().parse().unwrap();
            let dim = ex.task.width();
            assert_eq!(decode_prompt(input.as_slice(), dim, dim).unwrap(), ex.task);
            let (_, plan) = decode_response(target.as_slice(), env.kind()).unwrap();
            let verdict = validate_plan(&ex.task, &plan, ex.optimal_cost);
            assert!(verdict.optimal, "example {}", ex.id);
            assert!(v["level"].as_u64().unwrap() <= 4);
        }
    }
}

#[test]
fn prompt_file_and_rollout_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data: Vec<RawExample> = build_dataset(5, &maze5(), 3).unwrap();
    let prompts = dir.path().join("prompts.tsv");
    write_prompt_file(&data, ControlMode::Slow, fs::File::create(&prompts).unwrap()).unwrap();
    let text = fs::read_to_string(&prompts).unwrap();
    // A stand-in sampler: for each prompt, write two rollouts, one with a trailing flag column.
    let mut rollouts = String::new();
    for (line, ex) in text.lines().zip(&data) {
        let (id, prompt) = line.split_once('\t').unwrap();
        assert_eq!(id, ex.id.to_string());
        assert!(prompt.ends_with("eos bos create"));
        let full = format!("{} {}", ex.trace, ex.plan);
        let continuation = full.strip_prefix("create ").unwrap();
        rollouts.push_str(&format!("{id}\t{continuation} eos\n{id}\t{continuation}\ttruncated\n"));
    }
    let lines = read_rollouts(rollouts.as_bytes()).unwrap();
    assert_eq!(lines.len(), 10);
    let ev = evaluate::<f64>(&data, &lines, 2, ControlMode::Slow, "stand-in").unwrap();
    assert_eq!(ev.report.solved_3, 0.0);
    assert_eq!(ev.report.optimal_1, 1.0);
    assert_eq!(ev.report.swc, 1.0);
    assert!(ev.tasks.iter().all(|t| t.diagnostics == 1));
}

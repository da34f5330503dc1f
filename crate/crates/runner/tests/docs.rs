use srcpref_runner::config::RunConfig;

#[test]
fn documented_config_example_parses() {
    let doc = include_str!("../../../docs/config.md");
    let blocks: Vec<&str> = doc.split("```toml\n").skip(1).map(|b| b.split("```").next().unwrap()).collect();
    assert_eq!(blocks.len(), 2);
    let cfg = RunConfig::parse(&blocks.concat()).unwrap();
    assert_eq!(cfg.model_ids(), ["affinity", "olmo-2-7b"]);
    assert_eq!(cfg.endpoints[0].api_key_env.as_deref(), Some("VLLM_API_KEY"));
}

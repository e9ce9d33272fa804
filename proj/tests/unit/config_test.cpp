#include <doctest.h>

#include "chanrt/config/config.hpp"
#include "chanrt/error.hpp"
#include "test_modules.hpp"

using namespace chanrt;
using namespace chanrt::config;

namespace {

template <typename F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

const char* kCollection = R"(
<Module class="MicrophoneCollector">
    <SamplingRate>16000</SamplingRate>
    <Encoding>PCM_FLOAT</Encoding>
    <EncodingBitrate>32</EncodingBitrate>
    <Channels>MONO</Channels>
    <ContinuousChunks>6s</ContinuousChunks>
    <StartRecording>Immediately</StartRecording>
    <Output>AudioData</Output>
</Module>

<Module class="DataSaverModule">
    <save>
        <What>AudioData</What>
        <FileFormat>WAV</FileFormat>
        <StoragePath>
        <!-- one file per minute -->
            /sdcard/AudioData/audio_file_
        </StoragePath>
    </save>
</Module>

<!-- upload target runs a DataReceiverModule -->
<Module class="DataSyncModule">
    <FilePath>/sdcard/AudioData</FilePath>
    <UserIdentifier>User01</UserIdentifier>
</Module>

<Module class="NetworkClientModule">
    <ConnectTo>ip:port</ConnectTo>
</Module>
)";

const char* kDeployment = R"(
<Module class="MicrophoneCollector">
    <SamplingRate>16000</SamplingRate>
    <ContinuousChunks>6s</ContinuousChunks>
    <Output>AudioData</Output>
</Module>

<Module class="TensorFlowLiteModule">
    <Model>CoughDetector.tflite</Model>
    <Input>AudioData</Input>
    <Output>DetectedCoughs</Output>
    <Acceleration>GPU</Acceleration>
</Module>

<Module class="CoughVisualizerPlot">
    <Input>DetectedCoughs</Input>
</Module>
)";

class Recorder : public Module {
 public:
  void configure(const Properties& p) override {
    if (p.has("Reject")) throw Error(ErrorCode::InvalidProperty, "Reject");
  }
  void initialize() override {}
};

ModuleFactory recorder_factory(std::initializer_list<const char*> names) {
  ModuleFactory f;
  for (const char* n : names) f.add(n, [] { return std::make_unique<Recorder>(); });
  return f;
}

}  // namespace

TEST_CASE("collection config") {
  const auto cfg = parse_config(kCollection);
  REQUIRE(cfg.modules.size() == 4);
  const auto& mic = cfg.modules[0];
  CHECK(mic.class_name == "MicrophoneCollector");
  CHECK(mic.instance_name == "MicrophoneCollector0");
  const PropertyMap expected{{"SamplingRate", "16000"},      {"Encoding", "PCM_FLOAT"},
                             {"EncodingBitrate", "32"},      {"Channels", "MONO"},
                             {"ContinuousChunks", "6s"},     {"StartRecording", "Immediately"},
                             {"Output", "AudioData"}};
  CHECK(mic.properties.values() == expected);
  CHECK(mic.properties.duration_ms("ContinuousChunks") == 6000);

  const auto save = cfg.modules[1].properties.nested("save");
  CHECK(save.string("What") == "AudioData");
  CHECK(save.string("StoragePath") == "/sdcard/AudioData/audio_file_");
  CHECK(cfg.modules[2].properties.string("UserIdentifier") == "User01");
  CHECK(cfg.modules[3].properties.string("ConnectTo") == "ip:port");
  CHECK(cfg.modules[3].instance_name == "NetworkClientModule3");
}

TEST_CASE("deployment config") {
  const auto cfg = parse_config(kDeployment);
  REQUIRE(cfg.modules.size() == 3);
  const auto& tfl = cfg.modules[1];
  CHECK(tfl.class_name == "TensorFlowLiteModule");
  CHECK(tfl.properties.string("Model") == "CoughDetector.tflite");
  CHECK(tfl.properties.string("Input") == "AudioData");
  CHECK(tfl.properties.string("Output") == "DetectedCoughs");
  CHECK(cfg.modules[2].properties.string("Input") == "DetectedCoughs");
}

TEST_CASE("repeated elements become lists") {
  const auto cfg = parse_config(R"(<Config>
    <Module class="DataSaverModule" id="saver">
      <save><What>A</What></save>
      <save><What>B</What></save>
      <save><What>C</What></save>
    </Module></Config>)");
  REQUIRE(cfg.modules.size() == 1);
  CHECK(cfg.modules[0].instance_name == "saver");
  const auto saves = cfg.modules[0].properties.list("save");
  REQUIRE(saves.size() == 3);
  CHECK(Properties(saves[2].map()).string("What") == "C");
}

TEST_CASE("config errors") {
  CHECK(error_of([] { (void)parse_config("<Module><Output>x</Output></Module>"); }) == ErrorCode::MissingClassAttribute);
  CHECK(error_of([] { (void)parse_config("<Module class=\"A\"></Module"); }) == ErrorCode::MalformedXml);
  CHECK(error_of([] { (void)parse_config("<Module class=\"A\"><x></Module>"); }) == ErrorCode::MalformedXml);
  CHECK(error_of([] { (void)parse_config("<Module class=\"A\" id=\"a\"/><Module class=\"B\" id=\"a\"/>"); }) ==
        ErrorCode::DuplicateInstanceName);
  CHECK(error_of([] { (void)parse_config("<A/><B/>"); }) == ErrorCode::MalformedXml);
  CHECK(error_of([] { (void)parse_config("<Config><Thing/></Config>"); }) == ErrorCode::MalformedXml);
  CHECK(parse_config("<Config/>").modules.empty());
  CHECK(parse_config("").modules.empty());
}

TEST_CASE("load_modules is fail-fast") {
  const auto cfg = parse_config(kDeployment);
  {
    auto rt = create_runtime("edge");
    const auto factory = recorder_factory({"MicrophoneCollector", "TensorFlowLiteModule"});
    ErrorCode code{};
    std::string message;
    try {
      load_modules(*rt, cfg, factory);
    } catch (const Error& e) {
      code = e.code();
      message = e.what();
    }
    CHECK(code == ErrorCode::UnknownModuleClass);
    CHECK(message.find("CoughVisualizerPlot") != std::string::npos);
    CHECK(rt->modules().empty());
  }
  {
    auto rt = create_runtime("edge");
    const auto factory = recorder_factory({"MicrophoneCollector", "TensorFlowLiteModule", "CoughVisualizerPlot"});
    const auto handles = load_modules(*rt, cfg, factory);
    REQUIRE(handles.size() == 3);
    CHECK(handles[1].class_name == "TensorFlowLiteModule");
    CHECK(handles[1].properties.string("Output") == "DetectedCoughs");
  }
  {
    auto rt = create_runtime("edge");
    const auto factory = recorder_factory({"A"});
    auto bad = parse_config(R"(<Module class="A"><Reject>1</Reject></Module>)");
    CHECK(error_of([&] { load_modules(*rt, bad, factory); }) == ErrorCode::InvalidProperty);
  }
}

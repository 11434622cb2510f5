package corpus.r3.batch;

import com.fasterxml.jackson.databind.ObjectMapper;

public class Migration {

    public String migrate(Object row) throws Exception {
        ObjectMapper mapper = new ObjectMapper(); // -R3 class never reached
        return mapper.writeValueAsString(row);
    }
}
